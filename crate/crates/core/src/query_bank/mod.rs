//! Agent queries, the attention/FFN forward math that updates them, and the
//! per-track memory bank.

mod attention;
mod bank;
mod lifecycle;

pub use attention::{
    attention_weights, cross_attention_update, layer_norm, softmax, stack_rows, standardize, AttentionOutput,
    AttentionParams, Ffn, LAYER_NORM_EPS,
};
pub use bank::{bank_push, temporal_bank_attention, QueryMemoryBank};
pub use lifecycle::{lifecycle_step, AgentQuery, Lifecycle, QueryState, INIT_REFERENCE_HEIGHT, INIT_REFERENCE_RADIUS};
