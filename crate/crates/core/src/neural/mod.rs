//! Minimal double-precision numeric kernel: tensors, a reverse-mode tape,
//! initialization, dropout, momentum SGD and checkpoints.

pub mod checkpoint;
mod dropout;
mod gradcheck;
mod init;
pub mod ops;
mod optim;
mod params;
pub mod rng;
mod tape;
mod tensor;

pub use checkpoint::Checkpoint;
pub use dropout::{dropout, dropout_mask};
pub use gradcheck::{grad_check, grad_check_many};
pub use init::{fans, glorot_init, zero_bias};
pub use optim::{clip_grad_norm, sgd_step, OptimState};
pub use params::ParamStore;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}
