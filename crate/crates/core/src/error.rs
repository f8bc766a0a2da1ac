use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A quadrature or series failed to reach its tolerance.
    #[error("numeric failure in {what}: estimate {estimate:e}, error estimate {error:e}")]
    Numeric {
        what: String,
        estimate: f64,
        error: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(what: impl Into<String>, estimate: f64, error: f64) -> Self {
        Error::Numeric {
            what: what.into(),
            estimate,
            error,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
