//! Graph-attention encoder and output heads in plain `f64` arithmetic, with a
//! hand-written backward pass for the encoder and a finite-difference checker.
//!
//! Rows of every `n x d` matrix are graph nodes. The encoder embeds node
//! features, applies ego-query focusing layers that rescale each node by its
//! attention weight, then multi-head self-attention, and returns the ego row.

mod encoder;
mod gradcheck;
mod head;
pub mod matrix;

pub use encoder::{
    attention_focus_layer, embed, encode, encode_backward, encode_traced, self_attention_layer, AttentionDump,
    EncoderConfig, EncoderGradients, EncoderParams, EncoderTrace, FocusParams, HeadWeights, ScoreScale,
    SelfAttentionParams,
};
pub use gradcheck::{
    encoder_gradcheck, encoder_probe_gradient, finite_diff_gradcheck, probe_vector, relative_error, GradCheckReport,
    FD_STEP, REL_ERROR_FLOOR,
};
pub use head::{policy_head_forward, sigmoid, HeadOutput, HeadParams, Linear, RecurrentState};
pub use matrix::Matrix;
