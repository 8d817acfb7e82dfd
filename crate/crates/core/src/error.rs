use thiserror::Error;

use crate::comm::CommError;

/// Errors raised by the clustering algorithms and data utilities.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("csv row {row}: {msg}")]
    Csv { row: usize, msg: String },

    #[error("label {label} out of range for {k} centroids")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("degenerate membership column {0}")]
    DegenerateMembership(usize),

    #[error(transparent)]
    Comm(#[from] CommError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParam(msg.into())
}
