use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("need at least {required} points, got {actual}")]
    TooFewPoints { required: usize, actual: usize },

    #[error("{path}: row {row}: {reason}")]
    Parse { path: PathBuf, row: usize, reason: String },

    #[error("reference segment {index} is degenerate (constant signal); pick another reference")]
    DegenerateReference { index: usize },

    #[error("all points are identical; pairwise affinities are undefined")]
    IdenticalPoints,

    #[error("label sequences differ in length: {truth} vs {pred}")]
    LengthMismatch { truth: usize, pred: usize },

    #[error("{0}")]
    Pipeline(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
