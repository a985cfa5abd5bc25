use thiserror::Error;

/// Errors produced by the optimizers and their building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsgError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite evaluation at iteration {iteration}: {what}")]
    Evaluation { iteration: usize, what: String },
}

pub type Result<T> = std::result::Result<T, CsgError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CsgError::InvalidInput(msg.into()))
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(CsgError::DimensionMismatch { expected, actual })
    }
}
