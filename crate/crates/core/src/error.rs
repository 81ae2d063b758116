use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single input row that failed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },

    #[error("row error at line {line}, column `{column}`: {message}")]
    Row {
        line: u64,
        column: String,
        message: String,
    },

    #[error("{} row(s) failed validation; first: {}", .0.len(), .0[0])]
    InvalidRows(Vec<RowIssue>),

    #[error("integrity error: duplicate key {key}")]
    Integrity { key: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample-size error: need at least {required} effective samples, got {actual}")]
    SampleSize { required: usize, actual: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {cause}")]
    Stage {
        stage: String,
        #[source]
        cause: Box<Error>,
    },

    #[error("missing upstream report {}", .0.display())]
    MissingUpstream(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// The innermost error behind any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { cause, .. } => cause.root(),
            other => other,
        }
    }
}
