use thiserror::Error;

use crate::estimators::CovarianceEstimate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("snapshot batch is empty")]
    EmptyBatch,

    #[error("need at least {needed} secondary snapshots, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("snapshot {index} is degenerate: {reason}")]
    DegenerateSnapshot { index: usize, reason: String },

    #[error("fixed point iterate lost rank at iteration {iteration}")]
    RankDeficient { iteration: usize },

    #[error("no convergence after {} iterations (final relative deviation {:e})", .0.iterations, .0.final_rel_dev)]
    NoConvergence(Box<CovarianceEstimate>),

    #[error("noise floor is zero for array {array}")]
    NoiseFloorZero { array: usize },

    #[error("steering Gram matrix is singular")]
    SingularGram,

    #[error("detector {detector} cannot be paired with estimator {estimator}")]
    IncompatiblePair { detector: String, estimator: String },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cube format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidParameter(_) | Error::IncompatiblePair { .. }
        )
    }
}
