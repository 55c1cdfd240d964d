use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value violates its invariant.
    #[error("{key} out of range: {reason}")]
    Range { key: &'static str, reason: String },

    #[error("no bracket for p_sw = {target} in [{lo:e}, {hi:e}] A (p_sw at ends: {p_lo}, {p_hi})")]
    BracketFailure {
        target: f64,
        lo: f64,
        hi: f64,
        p_lo: f64,
        p_hi: f64,
    },

    #[error("noise calibration did not converge after {iterations} iterations")]
    CalibrationFailure { iterations: usize },

    #[error("config file line {line}: {message}")]
    ConfigFile { line: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn range(key: &'static str, reason: impl Into<String>) -> Self {
        Error::Range {
            key,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {value}")))
    }
}
