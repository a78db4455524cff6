use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// A factorization or solve failed. `eigenvalue` carries the smallest
    /// eigenvalue estimate of the offending matrix when one was computed.
    #[error("numerical failure in {context}{}", eigenvalue.map(|e| format!(" (min eigenvalue {e:e})")).unwrap_or_default())]
    Numerical {
        context: &'static str,
        eigenvalue: Option<f64>,
    },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid too narrow: boundary mass {mass:e} exceeds {limit:e}, widen the bounds")]
    GridTooNarrow { mass: f64, limit: f64 },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("report schema mismatch: {0}")]
    Schema(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn dim_err(context: &'static str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        context,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
