use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ingestion error at row {row}, column `{column}`: {message}")]
    Ingestion {
        row: usize,
        column: String,
        message: String,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("chain for shard {shard_id} failed: {source}")]
    Chain {
        shard_id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("incomplete run directory {dir}: missing {missing:?}")]
    IncompleteRun { dir: PathBuf, missing: Vec<String> },

    #[error("malformed record file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
