use std::io;

use thiserror::Error;

/// Errors produced by featurization, training, evaluation and model I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("feature id {id} out of bounds for weight slice of length {len}")]
    OutOfBounds { id: usize, len: usize },

    #[error("non-finite value {value} for feature {id}")]
    NonFinite { id: usize, value: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("position {pos} out of range for sentence of length {len}")]
    PositionOutOfRange { pos: usize, len: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),

    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),

    #[error("instance too large to enumerate ({0} label paths)")]
    TooLarge(f64),

    #[error("non-finite loss at epoch {epoch}, example {example}")]
    Diverged { epoch: usize, example: usize },

    #[error("unsupported model file: {0}")]
    UnsupportedModel(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
