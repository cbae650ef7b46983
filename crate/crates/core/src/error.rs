use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or adaptive routine did not reach its tolerance.
    #[error("numeric failure: {message}")]
    NumericFailure {
        message: String,
        /// Best available estimate at the time of failure, if any.
        best: Option<f64>,
    },

    /// A grid, kernel or option combination cannot produce a valid result.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed tabulated input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, best: Option<f64>) -> Self {
        Error::NumericFailure {
            message: msg.into(),
            best,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
