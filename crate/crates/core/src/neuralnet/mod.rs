//! Dense feed-forward regression networks trained by mini-batch backpropagation.

mod network;
mod train;

use thiserror::Error;

use crate::model::DimensionMismatch;

pub use network::{
    nn_backward, nn_forward, nn_init, Activation, ForwardCache, Gradients, Layer, LayerSpec,
    Network,
};
pub use train::{loss_history_csv, nn_train, EpochLoss, Optimizer, TrainConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("invalid layer specification: {0}")]
    InvalidSpec(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(
        "training loss became {loss} in epoch {epoch}; the learning rate is probably too high"
    )]
    DivergedLoss { epoch: usize, loss: f64 },
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}
