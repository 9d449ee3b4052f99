use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "quadrature did not reach requested tolerance {requested:e} \
         (best estimate {best}, achieved relative error {achieved:e})"
    )]
    Quadrature {
        best: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
