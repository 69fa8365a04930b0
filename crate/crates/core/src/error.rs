//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, numeric routines, and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Non-finite observations, inconsistent dataset shapes, and similar input defects.
    #[error("data error: {0}")]
    Data(String),

    /// Linear-algebra failures that survive the jitter ladder, non-finite intermediates.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Arguments outside a function's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Too few posterior draws survived the compatibility filter.
    #[error("insufficient compatible samples: got {got}, need {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
