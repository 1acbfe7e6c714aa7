use std::path::PathBuf;

use thiserror::Error;

use crate::annostudio::AnnotationError;
use crate::llmgate::GatewayError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("unknown record id {0:?}")]
    UnknownRecord(String),

    #[error(transparent)]
    Gateway(#[from] GatewayError),

    #[error(transparent)]
    Annotation(#[from] AnnotationError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Precondition(_) => "precondition",
            Error::Template(_) => "template",
            Error::UnknownRecord(_) => "unknown_record",
            Error::Gateway(_) => "gateway",
            Error::Annotation(e) => e.code(),
        }
    }
}
