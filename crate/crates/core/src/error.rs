use thiserror::Error;

use crate::contour::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    Profile(String),

    #[error("invalid escape function: {0}")]
    Escape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contour validation failed:\n{0}")]
    Contour(ValidationReport),

    #[error("singular matrix in {context} (condition estimate {condition:.3e})")]
    Singular { context: &'static str, condition: f64 },

    #[error("eigenvalue iteration did not converge for a {0}x{0} matrix")]
    EigenNonConvergence(usize),

    #[error("{op}: {reason}")]
    Numerical { op: &'static str, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numerical(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Numerical {
            op,
            reason: reason.into(),
        }
    }
}
