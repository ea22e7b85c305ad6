use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unresolved on grid: {0}")]
    Resolution(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite field encountered at t = {t}")]
    NonFinite { t: f64 },
    #[error("data norm {norm:.6e} exceeds amplitude cap {cap:.6e}")]
    AmplitudeCap { norm: f64, cap: f64 },
    #[error("time tail {tail:.3e} exceeds tolerance of value {value:.3e}")]
    TailTooLarge { tail: f64, value: f64 },
    #[error("pole of the transform at z = {0}")]
    Pole(String),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("no convergence: {0}")]
    NotConverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
