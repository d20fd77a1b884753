//! Dense networks and the Adam optimizer.

mod adam;
mod init;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use init::{xavier_bound, xavier_uniform, zero_bias};
pub use mlp::{Activation, BoundMlp, DenseLayer, Mlp};
