use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: invalid field `{field}`: {message}")]
    Validation {
        line: usize,
        field: &'static str,
        message: String,
    },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("series too short: need at least {needed} samples, got {actual}")]
    SeriesTooShort { needed: usize, actual: usize },

    #[error("records without session id: {0:?}")]
    MissingSessionId(Vec<usize>),

    #[error("model has not been trained")]
    Untrained,

    #[error("failure type `{0}` has no discriminative element")]
    NoDiscriminativeElement(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("unknown event `{0}`")]
    UnknownEvent(String),

    #[error("no modality present")]
    NoModalities,

    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("unknown service `{0}`")]
    UnknownService(String),

    #[error("unknown business metric `{0}`")]
    UnknownBusinessMetric(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

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

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
