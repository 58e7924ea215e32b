//! Dense feed-forward networks with manual reverse-mode gradients and Adam.

mod adam;
pub mod checkpoint;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use network::{glorot_uniform, Activation, DenseLayer, DenseNetwork, ForwardCache, Gradients};
