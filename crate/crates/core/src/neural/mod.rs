//! Bi-directional GRU classifier with temporal mean pooling, trained by
//! backpropagation through time.

pub mod gradcheck;
pub mod gru;
pub mod matrix;
pub mod model;
pub mod params;
pub mod train;

use thiserror::Error;

pub use gru::{backward, forward, loss, loss_and_gradient, softmax, GruState};
pub use matrix::Matrix;
pub use model::Model;
pub use params::{init_head, init_params, Dims, GruDirection, GruParams, TENSOR_NAMES};
pub use train::{argmax, evaluate_loss, train_epoch, AdamState, Example, TrainConfig};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("input has {got} features per frame, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in input frame {frame}")]
    NonFiniteInput { frame: usize },
    #[error("class index {index} out of range for {classes} classes")]
    BadClassIndex { index: usize, classes: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("model format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
