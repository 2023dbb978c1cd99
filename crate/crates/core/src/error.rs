use thiserror::Error;

/// Errors raised by the estimation, control and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid estimator spec: {0}")]
    EstimatorSpec(String),

    #[error("window holds {got} samples but the kernel expects {expected}")]
    WindowLength { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid transfer function: {0}")]
    TransferFunction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
