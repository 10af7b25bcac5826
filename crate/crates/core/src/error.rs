use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series too short: need at least {required} observations, got {actual}")]
    SeriesTooShort { required: usize, actual: usize },

    #[error("non-finite likelihood term at t = {t}, frequency index j = {j} (f = {f}, MI = {mi})")]
    Evaluation { t: usize, j: usize, f: f64, mi: f64 },

    #[error("surface value {value} is not strictly positive at (u = {u}, lambda = {lambda})")]
    NonPositiveSurface { u: f64, lambda: f64, value: f64 },

    #[error("chain initialization failed: {0}")]
    Initialization(String),

    #[error("input row {row}: {message}")]
    Data { row: usize, message: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
