//! The attentive polynomial graph filter over node embeddings and its
//! ablation variants.
//!
//! Forward pass for node `i`:
//!
//! ```text
//! z_i      = encoder(x_i)                        quantum (PQC) or classical
//! α^(h)    = softmax_j(w_h · z_j + b_h)          over every node of the graph
//! z_i^(h)  = Σ_j A^(h)_ij α^(h)_j z_j            A^(1) = A, A^(2) = A²
//! h_i      = σ(z_i + z_i^(1) + z_i^(2))
//! logit_i  = w_o · ReLU(W_h h_i + b_h) + b_o
//! ```

mod backward;
mod forward;
mod params;

pub use backward::{classical_encoder_backward, head_backward, HeadGradients};
pub use forward::{
    aggregate, attention_weights, classical_encode, encode, forward, forward_from_embeddings,
    forward_trace, fuse, mlp_forward, predict, ClassicalTrace, ForwardTrace,
};
pub(crate) use forward::check_inputs;
pub use params::{
    Activation, AttentionParams, ClassicalEncoder, EncoderParams, HopAttention, MlpParams,
    ModelConfig, ModelParams, ModelVariant, MODEL_FORMAT_VERSION, THETA_INIT_HALF_WIDTH,
};
