use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the embedding, debiasing and metric routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("I/O error")]
    Stream(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse {value:?} as a number")]
    BadNumber { line: usize, value: String },
    #[error("duplicate token {0:?}")]
    DuplicateToken(String),
    #[error("zero vector for token {0:?} cannot be normalized")]
    ZeroVector(String),
    #[error("non-finite value for token {0:?}")]
    NonFinite(String),
    #[error("header declares {declared} words, file contains {found}")]
    VocabCount { declared: usize, found: usize },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("identity {identity:?}: defining set {set} resolves to {resolved} in-vocabulary words, need at least 2")]
    UnderResolvedSet {
        identity: String,
        set: usize,
        resolved: usize,
    },
    #[error("invalid component count k = {k}: {reason}")]
    InvalidK { k: usize, reason: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },
    #[error("duplicate identity {0:?}")]
    DuplicateIdentity(String),
    #[error("unknown identity {0:?}")]
    UnknownIdentity(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("out-of-vocabulary word {0:?}")]
    OutOfVocabulary(String),
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("JSON error")]
    Json(#[from] serde_json::Error),
    #[error("CSV error")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
