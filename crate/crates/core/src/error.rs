use thiserror::Error;

/// Errors raised by the library. Messages are prefixed with the module that
/// produced them so the CLI can print them verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid_waves: degenerate jump (u_minus == u_plus)")]
    DegenerateJump,

    #[error("grid_waves: invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid_waves: invalid wave: {0}")]
    InvalidWave(String),

    #[error("noise_model: covariance not positive definite")]
    NotPositiveDefinite,

    #[error("noise_model: invalid parameter: {0}")]
    InvalidNoise(String),

    #[error("{module}: dimension mismatch: expected {expected}, got {actual}")]
    Dimension {
        module: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("path_optimizer: non-finite rate function value")]
    NonFinite,

    #[error("path_optimizer: {0}")]
    Optimizer(String),

    #[error("diagnostics: {0}")]
    Diagnostics(String),

    #[error("config: {key}: {message}")]
    Config { key: String, message: String },

    #[error("cli_harness: {0}")]
    Format(String),

    #[error("cli_harness: io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
