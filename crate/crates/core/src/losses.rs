//! Training-loss terms as pure functions over per-sample slices.
//!
//! `entropy_term` returns `sum p ln p`, the negative entropy, and
//! `total_loss` adds it with weight `iota` unchanged. Whether that sign
//! rewards or penalises determinism depends on the sign the caller gives `iota`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every probability before taking a logarithm.
pub const PROB_CLAMP: f64 = 1e-12;
/// Added to the standard deviation when normalising advantages.
pub const ADVANTAGE_EPS: f64 = 1e-8;
pub const DEFAULT_CLIP_EPSILON: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossCoefficients {
    /// Policy loss weight.
    pub alpha: f64,
    /// Value loss weight.
    pub beta: f64,
    /// Entropy weight.
    pub iota: f64,
    /// Blocking loss weight.
    pub zeta: f64,
    /// Valid-action loss weight.
    pub eta_coef: f64,
}

impl Default for LossCoefficients {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 0.08, iota: 0.01, zeta: 0.5, eta_coef: 0.5 }
    }
}

/// How the clipped branch of the surrogate is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// `min(r A, clip(r) A)`
    #[default]
    Standard,
    /// `min(r A, clip(r))`: the clipped ratio is not multiplied by the advantage.
    RawClip,
}

fn same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: lengths {a} and {b} differ")));
    }
    if a == 0 {
        return Err(Error::Shape(format!("{what}: empty input")));
    }
    Ok(())
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

fn ln_clamped(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln()
}

/// `(G - V)` shifted to zero mean and divided by its population standard
/// deviation plus [`ADVANTAGE_EPS`].
pub fn advantage_estimate(returns: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    same_len(returns.len(), values.len(), "advantage_estimate")?;
    let raw: Vec<f64> = returns.iter().zip(values).map(|(g, v)| g - v).collect();
    let mu = mean(raw.iter().copied(), raw.len());
    let std = mean(raw.iter().map(|r| (r - mu).powi(2)), raw.len()).sqrt();
    Ok(raw.into_iter().map(|r| (r - mu) / (std + ADVANTAGE_EPS)).collect())
}

pub fn ppo_policy_loss(ratios: &[f64], advantages: &[f64], epsilon: f64, mode: ClipMode) -> Result<f64> {
    same_len(ratios.len(), advantages.len(), "ppo_policy_loss")?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("clip epsilon {epsilon} must be in (0, 1)")));
    }
    let terms = ratios.iter().zip(advantages).map(|(&r, &a)| {
        let clipped = r.clamp(1.0 - epsilon, 1.0 + epsilon);
        let second = match mode {
            ClipMode::Standard => clipped * a,
            ClipMode::RawClip => clipped,
        };
        -f64::min(r * a, second)
    });
    Ok(mean(terms, ratios.len()))
}

/// Mean squared error between predicted values and returns.
pub fn value_loss(values: &[f64], returns: &[f64]) -> Result<f64> {
    same_len(values.len(), returns.len(), "value_loss")?;
    Ok(mean(values.iter().zip(returns).map(|(v, g)| (v - g).powi(2)), values.len()))
}

/// `sum p ln p` with `0 ln 0 = 0`.
pub fn entropy_term(policy: &[f64]) -> f64 {
    policy.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum()
}

fn bce(pred: f64, truth: f64) -> f64 {
    -(truth * ln_clamped(pred) + (1.0 - truth) * ln_clamped(1.0 - pred))
}

/// Mean binary cross-entropy of blocking predictions.
pub fn blocking_loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    same_len(pred.len(), truth.len(), "blocking_loss")?;
    Ok(mean(pred.iter().zip(truth).map(|(&p, &t)| bce(p, t)), pred.len()))
}

/// Binary cross-entropy between sigmoid policy outputs and the valid-action
/// mask, averaged over actions and then samples.
pub fn valid_loss(squashed: &[Vec<f64>], masks: &[Vec<f64>]) -> Result<f64> {
    same_len(squashed.len(), masks.len(), "valid_loss")?;
    let mut per_sample = Vec::with_capacity(squashed.len());
    for (p, m) in squashed.iter().zip(masks) {
        same_len(p.len(), m.len(), "valid_loss sample")?;
        per_sample.push(mean(p.iter().zip(m).map(|(&p, &t)| bce(p, t)), p.len()));
    }
    Ok(mean(per_sample.into_iter(), squashed.len()))
}

/// Cross-entropy of the policy against expert action distributions, averaged
/// over samples.
pub fn imitation_loss(policies: &[Vec<f64>], experts: &[Vec<f64>]) -> Result<f64> {
    same_len(policies.len(), experts.len(), "imitation_loss")?;
    let mut per_sample = Vec::with_capacity(policies.len());
    for (p, w) in policies.iter().zip(experts) {
        same_len(p.len(), w.len(), "imitation_loss sample")?;
        per_sample.push(-p.iter().zip(w).filter(|(_, &w)| w > 0.0).map(|(&p, &w)| w * ln_clamped(p)).sum::<f64>());
    }
    Ok(mean(per_sample.into_iter(), policies.len()))
}

pub fn total_loss(j_pi: f64, j_v: f64, entropy: f64, j_b: f64, j_valid: f64, c: &LossCoefficients) -> f64 {
    c.alpha * j_pi + c.beta * j_v + c.iota * entropy + c.zeta * j_b + c.eta_coef * j_valid
}
