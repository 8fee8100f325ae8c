use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{dot, softmax, softmax_backward, Matrix};
use crate::error::{Error, Result};

/// Divisor applied to self-attention scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreScale {
    /// `sqrt(d / heads)`
    #[default]
    PerHead,
    /// `sqrt(d)`
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub d: usize,
    /// Number of attention-focusing layers.
    pub n_focus: usize,
    /// Number of self-attention layers.
    pub n_self: usize,
    pub heads: usize,
    pub scale: ScoreScale,
    /// Adds the layer input to each self-attention output.
    pub residual: bool,
    /// Row-wise normalisation after each self-attention layer. Forward only.
    pub layer_norm: bool,
}

impl EncoderConfig {
    /// Small configuration used throughout the tests: `d = 8`, 8 heads.
    pub fn desk(input_dim: usize) -> Self {
        Self {
            input_dim,
            d: 8,
            n_focus: 2,
            n_self: 2,
            heads: 8,
            scale: ScoreScale::PerHead,
            residual: false,
            layer_norm: false,
        }
    }

    /// Full-size network: `d = 512`, 8 heads.
    pub fn full_scale(input_dim: usize) -> Self {
        Self { d: 512, ..Self::desk(input_dim) }
    }

    pub fn head_dim(&self) -> usize {
        self.d / self.heads
    }

    fn score_divisor(&self) -> f64 {
        match self.scale {
            ScoreScale::PerHead => (self.head_dim() as f64).sqrt(),
            ScoreScale::Full => (self.d as f64).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.d == 0 || self.heads == 0 {
            return Err(Error::InvalidArgument("input_dim, d and heads must be positive".into()));
        }
        if !self.d.is_multiple_of(self.heads) {
            return Err(Error::InvalidArgument(format!("d = {} is not divisible by {} heads", self.d, self.heads)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusParams {
    /// `d x d`
    pub w_q: Matrix,
    pub w_k: Matrix,
}

/// Projections for one head, each `head_dim x d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadWeights {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfAttentionParams {
    pub heads: Vec<HeadWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    /// `d x input_dim`; the embedding is `W v + b`.
    pub w_embed: Matrix,
    pub b_embed: Vec<f64>,
    pub focus: Vec<FocusParams>,
    pub self_attn: Vec<SelfAttentionParams>,
}

/// Uniform in `±1/sqrt(fan_in)`.
pub(crate) fn init_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::uniform(rows, cols, 1.0 / (cols as f64).sqrt(), rng)
}

impl EncoderParams {
    pub fn new(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, dh) = (config.d, config.head_dim());
        let w_embed = init_matrix(d, config.input_dim, &mut rng);
        let bound = 1.0 / (config.input_dim as f64).sqrt();
        let b_embed = Matrix::uniform(1, d, bound, &mut rng).data;
        let focus = (0..config.n_focus)
            .map(|_| FocusParams { w_q: init_matrix(d, d, &mut rng), w_k: init_matrix(d, d, &mut rng) })
            .collect();
        let self_attn = (0..config.n_self)
            .map(|_| SelfAttentionParams {
                heads: (0..config.heads)
                    .map(|_| HeadWeights {
                        w_q: init_matrix(dh, d, &mut rng),
                        w_k: init_matrix(dh, d, &mut rng),
                        w_v: init_matrix(dh, d, &mut rng),
                    })
                    .collect(),
            })
            .collect();
        Ok(Self { config, w_embed, b_embed, focus, self_attn })
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.w_embed.data, &self.b_embed];
        for f in &self.focus {
            out.extend([&f.w_q.data[..], &f.w_k.data[..]]);
        }
        for layer in &self.self_attn {
            for h in &layer.heads {
                out.extend([&h.w_q.data[..], &h.w_k.data[..], &h.w_v.data[..]]);
            }
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.w_embed.data, &mut self.b_embed];
        for f in &mut self.focus {
            out.extend([&mut f.w_q.data[..], &mut f.w_k.data[..]]);
        }
        for layer in &mut self.self_attn {
            for h in &mut layer.heads {
                out.extend([&mut h.w_q.data[..], &mut h.w_k.data[..], &mut h.w_v.data[..]]);
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// All weights in a fixed order: embedding, focusing layers, self-attention heads.
    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!("{} values for {} parameters", flat.len(), self.param_count())));
        }
        let mut rest = flat;
        for s in self.slices_mut() {
            let (head, tail) = rest.split_at(s.len());
            s.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.slices_mut().into_iter().for_each(|s| s.fill(0.0));
        z
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

pub fn embed(features: &[Vec<f64>], w: &Matrix, b: &[f64]) -> Result<Matrix> {
    if b.len() != w.rows {
        return Err(Error::Shape(format!("bias has {} entries for {} outputs", b.len(), w.rows)));
    }
    if features.is_empty() {
        return Err(Error::Shape("no input rows".into()));
    }
    let mut u = Matrix::zeros(features.len(), w.rows);
    for (i, v) in features.iter().enumerate() {
        if v.len() != w.cols {
            return Err(Error::Shape(format!("row {i} has {} features, expected {}", v.len(), w.cols)));
        }
        let out = w.apply(v);
        for (o, (x, bias)) in u.row_mut(i).iter_mut().zip(out.iter().zip(b)) {
            *o = x + bias;
        }
    }
    Ok(u)
}

#[derive(Debug, Clone)]
struct FocusTrace {
    input: Matrix,
    q: Vec<f64>,
    keys: Matrix,
    alpha: Vec<f64>,
}

fn focus_forward(u: &Matrix, ego: usize, p: &FocusParams) -> (Matrix, FocusTrace) {
    let scale = (u.cols as f64).sqrt();
    let q = p.w_q.apply(u.row(ego));
    let keys = u.matmul_t(&p.w_k);
    let scores: Vec<f64> = (0..u.rows).map(|i| dot(&q, keys.row(i)) / scale).collect();
    let alpha = softmax(&scores);
    let mut out = u.clone();
    for (i, &a) in alpha.iter().enumerate() {
        out.row_mut(i).iter_mut().for_each(|v| *v *= a);
    }
    (out, FocusTrace { input: u.clone(), q, keys, alpha })
}

fn check_square(m: &Matrix, d: usize, what: &str) -> Result<()> {
    if (m.rows, m.cols) != (d, d) {
        return Err(Error::Shape(format!("{what} is {}x{}, expected {d}x{d}", m.rows, m.cols)));
    }
    Ok(())
}

/// Ego-query attention that rescales each row by its weight. Returns the
/// rescaled rows and the weights.
pub fn attention_focus_layer(u: &Matrix, ego: usize, p: &FocusParams) -> Result<(Matrix, Vec<f64>)> {
    if ego >= u.rows {
        return Err(Error::InvalidArgument(format!("ego row {ego} out of range for {} rows", u.rows)));
    }
    check_square(&p.w_q, u.cols, "W_q")?;
    check_square(&p.w_k, u.cols, "W_k")?;
    let (out, trace) = focus_forward(u, ego, p);
    Ok((out, trace.alpha))
}

#[derive(Debug, Clone)]
struct HeadTrace {
    q: Matrix,
    k: Matrix,
    v: Matrix,
    beta: Matrix,
}

#[derive(Debug, Clone)]
struct SelfTrace {
    input: Matrix,
    heads: Vec<HeadTrace>,
}

fn row_softmax(m: &mut Matrix) {
    for r in 0..m.rows {
        let p = softmax(m.row(r));
        m.row_mut(r).copy_from_slice(&p);
    }
}

fn layer_norm_rows(m: &mut Matrix) {
    for r in 0..m.rows {
        let row = m.row_mut(r);
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + 1e-5).sqrt();
        row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
    }
}

fn self_forward(u: &Matrix, p: &SelfAttentionParams, config: &EncoderConfig) -> (Matrix, SelfTrace) {
    let dh = config.head_dim();
    let divisor = config.score_divisor();
    let mut out = Matrix::zeros(u.rows, u.cols);
    let mut heads = Vec::with_capacity(p.heads.len());
    for (hi, h) in p.heads.iter().enumerate() {
        let q = u.matmul_t(&h.w_q);
        let k = u.matmul_t(&h.w_k);
        let v = u.matmul_t(&h.w_v);
        let mut beta = q.matmul_t(&k);
        beta.scale(1.0 / divisor);
        row_softmax(&mut beta);
        out.set_columns(hi * dh, &beta.matmul(&v));
        heads.push(HeadTrace { q, k, v, beta });
    }
    if config.residual {
        out.add_assign(u);
    }
    if config.layer_norm {
        layer_norm_rows(&mut out);
    }
    (out, SelfTrace { input: u.clone(), heads })
}

fn check_heads(p: &SelfAttentionParams, config: &EncoderConfig) -> Result<()> {
    if p.heads.len() != config.heads {
        return Err(Error::Shape(format!("{} heads, expected {}", p.heads.len(), config.heads)));
    }
    let want = (config.head_dim(), config.d);
    for h in &p.heads {
        for m in [&h.w_q, &h.w_k, &h.w_v] {
            if (m.rows, m.cols) != want {
                return Err(Error::Shape(format!(
                    "head projection is {}x{}, expected {}x{}",
                    m.rows, m.cols, want.0, want.1
                )));
            }
        }
    }
    Ok(())
}

/// Multi-head self-attention. Returns the output rows and the row-stochastic
/// weight matrix of every head.
pub fn self_attention_layer(
    u: &Matrix,
    p: &SelfAttentionParams,
    config: &EncoderConfig,
) -> Result<(Matrix, Vec<Matrix>)> {
    config.validate()?;
    if u.cols != config.d {
        return Err(Error::Shape(format!("input width {} but d = {}", u.cols, config.d)));
    }
    check_heads(p, config)?;
    let (out, trace) = self_forward(u, p, config);
    Ok((out, trace.heads.into_iter().map(|h| h.beta).collect()))
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    pub ego: usize,
    inputs: Matrix,
    focus: Vec<FocusTrace>,
    self_attn: Vec<SelfTrace>,
    /// Final `n x d` representation; the encoder output is row `ego`.
    pub output: Matrix,
}

impl EncoderTrace {
    pub fn ego_feature(&self) -> Vec<f64> {
        self.output.row(self.ego).to_vec()
    }

    pub fn dump(&self) -> AttentionDump {
        AttentionDump {
            ego: self.ego,
            nodes: self.inputs.rows,
            alpha: self.focus.iter().map(|f| f.alpha.clone()).collect(),
            beta: self
                .self_attn
                .iter()
                .map(|l| l.heads.iter().map(|h| (0..h.beta.rows).map(|r| h.beta.row(r).to_vec()).collect()).collect())
                .collect(),
        }
    }
}

/// Attention weights of one forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionDump {
    pub ego: usize,
    pub nodes: usize,
    /// `alpha[layer][node]`
    pub alpha: Vec<Vec<f64>>,
    /// `beta[layer][head][row][col]`
    pub beta: Vec<Vec<Vec<Vec<f64>>>>,
}

fn validate_params(params: &EncoderParams) -> Result<()> {
    let c = &params.config;
    c.validate()?;
    if (params.w_embed.rows, params.w_embed.cols) != (c.d, c.input_dim) {
        return Err(Error::Shape(format!(
            "W_embed is {}x{}, expected {}x{}",
            params.w_embed.rows, params.w_embed.cols, c.d, c.input_dim
        )));
    }
    if params.focus.len() != c.n_focus || params.self_attn.len() != c.n_self {
        return Err(Error::Shape("layer counts disagree with config".into()));
    }
    for f in &params.focus {
        check_square(&f.w_q, c.d, "W_q")?;
        check_square(&f.w_k, c.d, "W_k")?;
    }
    for layer in &params.self_attn {
        check_heads(layer, c)?;
    }
    Ok(())
}

pub fn encode_traced(features: &[Vec<f64>], ego: usize, params: &EncoderParams) -> Result<EncoderTrace> {
    validate_params(params)?;
    if ego >= features.len() {
        return Err(Error::InvalidArgument(format!("ego row {ego} out of range for {} rows", features.len())));
    }
    let mut u = embed(features, &params.w_embed, &params.b_embed)?;
    let inputs = Matrix::from_rows(features);
    let mut focus = Vec::with_capacity(params.focus.len());
    for p in &params.focus {
        let (next, t) = focus_forward(&u, ego, p);
        focus.push(t);
        u = next;
    }
    let mut self_attn = Vec::with_capacity(params.self_attn.len());
    for p in &params.self_attn {
        let (next, t) = self_forward(&u, p, &params.config);
        self_attn.push(t);
        u = next;
    }
    Ok(EncoderTrace { ego, inputs, focus, self_attn, output: u })
}

/// Embedding, focusing layers, self-attention layers, then the ego row.
pub fn encode(features: &[Vec<f64>], ego: usize, params: &EncoderParams) -> Result<Vec<f64>> {
    Ok(encode_traced(features, ego, params)?.ego_feature())
}

fn focus_backward(t: &FocusTrace, ego: usize, p: &FocusParams, dout: &Matrix, g: &mut FocusParams) -> Matrix {
    let u = &t.input;
    let scale = (u.cols as f64).sqrt();
    let mut du = Matrix::zeros(u.rows, u.cols);
    let dalpha: Vec<f64> = (0..u.rows).map(|i| dot(dout.row(i), u.row(i))).collect();
    for i in 0..u.rows {
        for (o, &g) in du.row_mut(i).iter_mut().zip(dout.row(i)) {
            *o = t.alpha[i] * g;
        }
    }
    let ds: Vec<f64> = softmax_backward(&t.alpha, &dalpha).into_iter().map(|v| v / scale).collect();
    let dq = t.keys.apply_t(&ds);
    let mut dkeys = Matrix::zeros(u.rows, u.cols);
    dkeys.add_outer(&ds, &t.q);
    g.w_k.add_assign(&dkeys.t_matmul(u));
    du.add_assign(&dkeys.matmul(&p.w_k));
    g.w_q.add_outer(&dq, u.row(ego));
    for (o, v) in du.row_mut(ego).iter_mut().zip(p.w_q.apply_t(&dq)) {
        *o += v;
    }
    du
}

fn self_backward(
    t: &SelfTrace,
    p: &SelfAttentionParams,
    config: &EncoderConfig,
    dout: &Matrix,
    g: &mut SelfAttentionParams,
) -> Matrix {
    let u = &t.input;
    let dh = config.head_dim();
    let divisor = config.score_divisor();
    let mut du = if config.residual { dout.clone() } else { Matrix::zeros(u.rows, u.cols) };
    for (hi, ((h, ht), gh)) in p.heads.iter().zip(&t.heads).zip(&mut g.heads).enumerate() {
        let dz = dout.columns(hi * dh, dh);
        let dbeta = dz.matmul_t(&ht.v);
        let dv = ht.beta.t_matmul(&dz);
        let mut ds = Matrix::zeros(u.rows, u.rows);
        for r in 0..u.rows {
            let row = softmax_backward(ht.beta.row(r), dbeta.row(r));
            ds.row_mut(r).iter_mut().zip(row).for_each(|(o, v)| *o = v / divisor);
        }
        let dq = ds.matmul(&ht.k);
        let dk = ds.t_matmul(&ht.q);
        gh.w_q.add_assign(&dq.t_matmul(u));
        gh.w_k.add_assign(&dk.t_matmul(u));
        gh.w_v.add_assign(&dv.t_matmul(u));
        du.add_assign(&dq.matmul(&h.w_q));
        du.add_assign(&dk.matmul(&h.w_k));
        du.add_assign(&dv.matmul(&h.w_v));
    }
    du
}

/// Gradients of a scalar loss with respect to every weight and every input feature.
#[derive(Debug, Clone)]
pub struct EncoderGradients {
    pub params: EncoderParams,
    /// `n x input_dim`
    pub features: Matrix,
}

/// Backpropagates `d_ego`, the gradient of a scalar loss with respect to the
/// ego output row.
pub fn encode_backward(trace: &EncoderTrace, params: &EncoderParams, d_ego: &[f64]) -> Result<EncoderGradients> {
    let c = &params.config;
    if c.layer_norm {
        return Err(Error::Unsupported("backward pass through layer normalisation".into()));
    }
    if d_ego.len() != c.d {
        return Err(Error::Shape(format!("output gradient has {} entries, expected {}", d_ego.len(), c.d)));
    }
    let mut grads = params.zeros_like();
    let mut du = Matrix::zeros(trace.output.rows, c.d);
    du.row_mut(trace.ego).copy_from_slice(d_ego);
    for ((t, p), g) in trace.self_attn.iter().zip(&params.self_attn).zip(&mut grads.self_attn).rev() {
        du = self_backward(t, p, c, &du, g);
    }
    for ((t, p), g) in trace.focus.iter().zip(&params.focus).zip(&mut grads.focus).rev() {
        du = focus_backward(t, trace.ego, p, &du, g);
    }
    grads.w_embed.add_assign(&du.t_matmul(&trace.inputs));
    for r in 0..du.rows {
        grads.b_embed.iter_mut().zip(du.row(r)).for_each(|(b, v)| *b += v);
    }
    let features = du.matmul(&params.w_embed);
    Ok(EncoderGradients { params: grads, features })
}
