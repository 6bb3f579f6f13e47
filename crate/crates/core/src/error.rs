use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    Shape {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("action {action} out of range for {count} actions")]
    InvalidAction { action: usize, count: usize },
    #[error("architecture mismatch: {0}")]
    Architecture(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible generation: {0}")]
    Infeasible(String),
    #[error("episode already finished; call reset")]
    EpisodeFinished,
    #[error("module input mismatch: {0}")]
    ModuleInput(String),
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("not enough data: {0}")]
    Underfull(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("cannot parse {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Errors caused by the user's configuration rather than by the run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Parse { .. } | Error::Infeasible(_))
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
