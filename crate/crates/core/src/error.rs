use std::path::PathBuf;

use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T, E = RcurcError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RcurcError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A numeric failure inside the iteration loop. `partial` holds the
    /// report as of the last completed iteration, if there was one.
    #[error("solver failed at iteration {iteration}: {message}")]
    Solve {
        iteration: usize,
        message: String,
        partial: Option<Box<SolveReport>>,
    },
}

impl RcurcError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        RcurcError::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RcurcError::Io {
            path: path.into(),
            source,
        }
    }
}
