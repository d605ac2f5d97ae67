use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid sector bounds m = {m}, L = {l}: need 0 < m <= L")]
    InvalidBounds { m: f64, l: f64 },

    #[error("eigenvalue {value} lies outside the declared sector [{m}, {l}]")]
    EigenvalueOutOfSector { value: f64, m: f64, l: f64 },

    #[error("non-finite gradient at t = {t}")]
    NonFiniteGradient { t: usize },

    #[error("point within {radius:e} of sensor {sensor} at t = {t}")]
    SensorSingularity { sensor: usize, t: usize, radius: f64 },

    #[error("transfer function has a pole on the unit circle at omega = {omega}")]
    PoleOnUnitCircle { omega: f64 },

    #[error("G0 has a double pole at z = 1")]
    PoleAtOne,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
