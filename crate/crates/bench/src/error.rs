use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// Invalid or unreadable experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("trace error: {0}")]
    Trace(String),

    #[error(transparent)]
    Core(#[from] maximin::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
