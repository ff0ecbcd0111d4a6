//! Window classifier: tensors, layers, loss, optimizer, training loop,
//! window-size search and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod grid;
pub mod layers;
pub mod loss;
pub mod model;
pub mod tensor;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader};
pub use grid::{grid_search_window, select_best, GridResult, DEFAULT_WINDOW_CANDIDATES};
pub use model::{Model, ModelConfig};
pub use tensor::Tensor;
pub use train::{initial_model, train, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("training produced a non-finite loss")]
    NonFinite,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
