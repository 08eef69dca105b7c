use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("not a SELECT statement")]
    NotSelect,

    #[error("row {row}, column {column}: {message}")]
    MalformedRow {
        row: usize,
        column: String,
        message: String,
    },

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("query {query_id}: missing {what}")]
    Missing { query_id: String, what: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn missing(query_id: &str, what: impl Into<String>) -> Self {
        Error::Missing {
            query_id: query_id.to_string(),
            what: what.into(),
        }
    }
}
