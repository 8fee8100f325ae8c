use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{encode_backward, encode_traced, EncoderParams};
use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this in both estimates are compared on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter index where `max_rel_error` occurs.
    pub worst_index: usize,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `analytic` against central differences of `f` around `x0`.
pub fn finite_diff_gradcheck<F>(mut f: F, x0: &[f64], analytic: &[f64], step: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if x0.len() != analytic.len() {
        return Err(Error::Shape(format!("{} parameters but {} gradient entries", x0.len(), analytic.len())));
    }
    let mut x = x0.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst_index: 0, checked: x0.len() };
    for i in 0..x.len() {
        x[i] = x0[i] + step;
        let plus = f(&x)?;
        x[i] = x0[i] - step;
        let minus = f(&x)?;
        x[i] = x0[i];
        let err = relative_error(analytic[i], (plus - minus) / (2.0 * step));
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    Ok(report)
}

/// Random direction in `[-1, 1]^d` used to reduce the encoder output to a scalar.
pub fn probe_vector(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::uniform(1, d, 1.0, &mut rng).data
}

/// Loss `probe . encode(features)` and its gradient over the flattened weights.
pub fn encoder_probe_gradient(
    params: &EncoderParams,
    features: &[Vec<f64>],
    ego: usize,
    probe: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let trace = encode_traced(features, ego, params)?;
    let loss = dot(probe, &trace.ego_feature());
    let grads = encode_backward(&trace, params, probe)?;
    Ok((loss, grads.params.flatten()))
}

/// Full-encoder check: analytic weight gradients against central differences.
pub fn encoder_gradcheck(
    params: &EncoderParams,
    features: &[Vec<f64>],
    ego: usize,
    probe_seed: u64,
) -> Result<GradCheckReport> {
    let probe = probe_vector(params.config.d, probe_seed);
    let (_, analytic) = encoder_probe_gradient(params, features, ego, &probe)?;
    let mut scratch = params.clone();
    finite_diff_gradcheck(
        |flat| {
            scratch.set_flat(flat)?;
            Ok(dot(&probe, &encode_traced(features, ego, &scratch)?.ego_feature()))
        },
        &params.flatten(),
        &analytic,
        FD_STEP,
    )
}
