//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite gradient in parameter '{0}'")]
    NonFiniteGradient(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: String,
        line: usize,
        message: String,
    },

    #[error("document '{doc_id}': {message}")]
    InvalidAnnotation { doc_id: String, message: String },

    #[error("vocabulary is empty: nothing survived the frequency thresholds")]
    EmptyVocabulary,

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model file '{path}': {message}")]
    ModelFile { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
