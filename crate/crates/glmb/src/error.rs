use thiserror::Error;

/// Errors produced by the filter and its building blocks.
#[derive(Debug, Error)]
pub enum GlmbError {
    /// Malformed caller input (ragged matrix, NaN entry, zero counts, bad probability).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A density with no usable probability mass (all weights zero / -inf).
    #[error("degenerate density: {0}")]
    Degenerate(String),

    /// Numerical failure (singular innovation covariance, non-PD matrix), with context.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, GlmbError>;
