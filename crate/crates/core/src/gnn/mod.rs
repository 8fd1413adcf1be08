//! GCN encoder, MLP heads, attention readout baseline and checkpoints.

pub mod checkpoint;
pub mod layers;

pub use checkpoint::Checkpoint;
pub use layers::{
    attention_readout, classify, encode, init_uniform, mean_readout, topk_attention_subgraph, AttentionReadout,
    GcnEncoder, Linear, Mlp,
};
