use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("degenerate system: {0}")]
    DegenerateSystem(String),

    #[error("invalid system: matrix `{matrix}`: {reason}")]
    InvalidSystem { matrix: String, reason: String },

    #[error("invalid pair: {0}")]
    InvalidPair(String),

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("singular system (zero pivot in column {column})")]
    Singular { column: usize },

    #[error("no convergence after {iterations} iterations (last estimate {last_estimate:e})")]
    NoConvergence { iterations: usize, last_estimate: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
