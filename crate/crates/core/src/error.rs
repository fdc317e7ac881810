//! Error type shared by every module in the crate.

use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument violated a precondition (non-finite input, empty batch, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An index was outside the valid range.
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    /// An operation was called in the wrong order (e.g. backward before forward).
    #[error("invalid state: {0}")]
    State(&'static str),
    /// A configuration value was rejected.
    #[error("config error: {0}")]
    Config(String),
    /// The input admits no meaningful answer (e.g. zero variance for Pearson).
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    /// Tensor shapes were incompatible.
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
