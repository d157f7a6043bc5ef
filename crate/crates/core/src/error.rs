//! Error type shared across the engine.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, EngineError>;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("date {0} is not on the simulation grid")]
    DateOffGrid(f64),

    #[error("grid is not strictly increasing")]
    NonMonotonicGrid,

    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("bandwidth {bandwidth} exceeds sample size {samples}")]
    BandwidthExceedsSamples { bandwidth: usize, samples: usize },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error(
        "portfolio of {n} options exceeds the desk-scale cap of {cap}; \
         larger decision state spaces are not supported"
    )]
    DeskScaleExceeded { n: usize, cap: usize },
}

impl EngineError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        EngineError::InvalidInput(msg.into())
    }
}
