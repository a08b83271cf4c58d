use thiserror::Error;

use crate::lagrangian::DualPair;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("expected a vector with entries in {{-1, +1}}")]
    NotSignVector,

    /// The iterate left the finite region or exceeded the divergence cap.
    /// Carries the last iterate that was still finite.
    #[error("solver diverged at iteration {iter}")]
    Diverged { iter: usize, last: Box<DualPair> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("problem too large for exhaustive search: n = {n} (max {max})")]
    TooLarge { n: usize, max: usize },

    #[error("pair sampler could not produce a pair with distinct objective values")]
    SamplerExhausted,

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
