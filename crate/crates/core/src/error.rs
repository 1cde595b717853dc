use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
///
/// The variants are grouped so that a driver can map them onto coarse exit
/// classes (see [`Error::class`]).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("backend error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Backend {
        status: Option<u16>,
        message: String,
    },

    #[error("embedding failed for {descriptor:?}: {source}")]
    Embedding {
        descriptor: String,
        #[source]
        source: Box<Error>,
    },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// The in-memory state is kept so a caller can still report or retry.
    #[error("could not write checkpoint {path}: {message}")]
    CheckpointWrite {
        path: PathBuf,
        message: String,
        state_json: String,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Backend,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Argument(_) => ErrorClass::Usage,
            Error::Backend { .. } => ErrorClass::Backend,
            Error::Embedding { source, .. } => match source.class() {
                ErrorClass::Backend => ErrorClass::Backend,
                _ => ErrorClass::Data,
            },
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
