use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::init_matrix;
use super::matrix::{softmax, Matrix};
use crate::env::Action;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `out x in`
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Linear {
    fn new(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = init_matrix(output, input, rng);
        let b = Matrix::uniform(1, output, 1.0 / (input as f64).sqrt(), rng).data;
        Self { w, b }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.w.apply(x).into_iter().zip(&self.b).map(|(v, b)| v + b).collect()
    }
}

/// LSTM hidden and cell state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl RecurrentState {
    pub fn zeros(d: usize) -> Self {
        Self { h: vec![0.0; d], c: vec![0.0; d] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub input_dim: usize,
    pub d: usize,
    /// Projects the concatenated observation to width `d`.
    pub input: Linear,
    pub res1: Linear,
    pub res2: Linear,
    /// Gate pre-activations `[i; f; g; o]`, each block `d` rows.
    pub lstm_x: Linear,
    pub lstm_h: Matrix,
    pub policy: Linear,
    pub value: Linear,
    pub blocking: Linear,
}

impl HeadParams {
    pub fn new(input_dim: usize, d: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || d == 0 {
            return Err(Error::InvalidArgument("head dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            input_dim,
            d,
            input: Linear::new(input_dim, d, &mut rng),
            res1: Linear::new(d, d, &mut rng),
            res2: Linear::new(d, d, &mut rng),
            lstm_x: Linear::new(d, 4 * d, &mut rng),
            lstm_h: init_matrix(4 * d, d, &mut rng),
            policy: Linear::new(d, Action::COUNT, &mut rng),
            value: Linear::new(d, 1, &mut rng),
            blocking: Linear::new(d, 1, &mut rng),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadOutput {
    pub logits: [f64; Action::COUNT],
    pub policy: [f64; Action::COUNT],
    pub value: f64,
    pub blocking: f64,
    pub state: RecurrentState,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// Concatenated observation -> residual block -> LSTM cell -> policy, value
/// and blocking outputs.
pub fn policy_head_forward(
    static_feat: &[f64],
    intent_feat: &[f64],
    local_feat: &[f64],
    goal_vec: &[f64; 3],
    params: &HeadParams,
    state: &RecurrentState,
) -> Result<HeadOutput> {
    let x: Vec<f64> = [static_feat, intent_feat, local_feat, goal_vec].concat();
    if x.len() != params.input_dim {
        return Err(Error::Shape(format!("head input has {} values, expected {}", x.len(), params.input_dim)));
    }
    let d = params.d;
    if state.h.len() != d || state.c.len() != d {
        return Err(Error::Shape(format!("recurrent state width must be {d}")));
    }

    let mut x0 = params.input.forward(&x);
    relu(&mut x0);
    let mut hidden = params.res1.forward(&x0);
    relu(&mut hidden);
    let mut y: Vec<f64> = params.res2.forward(&hidden).iter().zip(&x0).map(|(a, b)| a + b).collect();
    relu(&mut y);

    let gates: Vec<f64> =
        params.lstm_x.forward(&y).into_iter().zip(params.lstm_h.apply(&state.h)).map(|(a, b)| a + b).collect();
    let mut next = RecurrentState::zeros(d);
    for j in 0..d {
        let i = sigmoid(gates[j]);
        let f = sigmoid(gates[d + j]);
        let g = gates[2 * d + j].tanh();
        let o = sigmoid(gates[3 * d + j]);
        next.c[j] = f * state.c[j] + i * g;
        next.h[j] = o * next.c[j].tanh();
    }

    let logits: [f64; Action::COUNT] = params.policy.forward(&next.h).try_into().expect("policy width");
    let policy: [f64; Action::COUNT] = softmax(&logits).try_into().expect("policy width");
    Ok(HeadOutput {
        logits,
        policy,
        value: params.value.forward(&next.h)[0],
        blocking: sigmoid(params.blocking.forward(&next.h)[0]),
        state: next,
    })
}
