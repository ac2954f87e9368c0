use thiserror::Error;

/// Errors produced while building, factoring, or evaluating networks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("factorization residual {residual:e} exceeds tolerance {tolerance:e}")]
    Conditioning { residual: f64, tolerance: f64 },

    #[error("ridge basis generation failed after {attempts} attempts")]
    Generation { attempts: usize },

    #[error("ridge decomposition residual {residual:e} exceeds tolerance")]
    Decomposition { residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
