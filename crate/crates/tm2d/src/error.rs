//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not line up for an operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A sequence is shorter than an operation requires.
    #[error("sequence too short: {0}")]
    TooShort(String),

    /// An index (token id, class id, joint id) is out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// Invalid configuration value or unknown configuration key.
    #[error("config error: {0}")]
    Config(String),

    /// A value lies outside its documented range.
    #[error("range error: {0}")]
    Range(String),

    /// An API contract was violated (wrong arity, non-scalar loss, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Numerical failure (non-finite value, non-convergent iteration).
    #[error("numerical error: {0}")]
    Numeric(String),

    /// File magic or version does not match, or checkpoints are incompatible.
    #[error("version error: {0}")]
    Version(String),

    /// Malformed file content.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
