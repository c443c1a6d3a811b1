//! From-scratch neural classifiers over audio (and text) features.

mod format;
mod model;
mod optim;
mod spec;
mod tensor;
mod train;

use thiserror::Error;

pub use format::{deserialize_model, load_model, save_model, serialize_model, MAGIC, VERSION};
pub use model::{Model, Normalizer, Sample};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use spec::{Arch, InputShape, LayerSpec, ModelSpec};
pub use tensor::{conv1d_forward, cross_entropy, dense_forward, relu, softmax, Tensor, CE_FLOOR};
pub use train::{loss_history_csv, train, train_with_progress, EpochCallback, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite values: {0}")]
    NonFinite(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("io: {0}")]
    Io(String),
}
