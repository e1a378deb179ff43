use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("unsupported growth: {0}")]
    UnsupportedGrowth(String),
    #[error("inadmissible noise intensity eps = {eps}: must be below {bound}")]
    Inadmissible { eps: f64, bound: f64 },
    #[error("constant C_rho1 has not been declared or fitted for model '{0}'")]
    MissingConstant(String),
    #[error("numerical blow-up at step {step} (t = {t})")]
    Blowup { step: usize, t: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
