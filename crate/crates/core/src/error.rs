use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("rules line {line}: {message}")]
    RuleSyntax { line: usize, message: String },

    #[error("rule {rule} references unknown attribute {attr:?}")]
    UnknownAttribute { rule: String, attr: String },

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("mask: {0}")]
    Mask(String),

    #[error("no mining evidence for ({0}, {1}): no tuple is complete on both attributes")]
    NoMiningEvidence(String, String),

    #[error("search provider: {message}")]
    Provider { message: String, retryable: bool },

    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("evaluation: {0}")]
    Eval(String),

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

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Provider { retryable: true, .. })
    }

    /// Errors caused by the input data rather than by how the tool was invoked.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}
