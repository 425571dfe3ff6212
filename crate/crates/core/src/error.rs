use thiserror::Error;

use crate::data::io::DatasetFormatError;
use crate::models::checkpoint::CheckpointError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A valid-padding kernel does not fit inside its input.
    #[error("dimension error: kernel {kernel} larger than input {input} on {axis} axis")]
    Dimension {
        axis: &'static str,
        kernel: usize,
        input: usize,
    },

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("backward called without a cached forward pass")]
    MissingCache,

    #[error("layer index {index} out of range or not convolutional ({reason})")]
    LayerIndex { index: usize, reason: &'static str },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error(transparent)]
    DatasetFormat(#[from] DatasetFormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
