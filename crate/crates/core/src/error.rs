use std::io;
use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid label {value:?}: {reason}")]
    InvalidLabel { value: String, reason: &'static str },

    #[error("invalid language code {0:?}")]
    InvalidLang(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("cannot build an index over an empty ontology")]
    EmptyOntology,

    #[error("length mismatch: {results} results but {golds} gold labels")]
    LengthMismatch { results: usize, golds: usize },

    #[error("need {needed} examples but only {available} are available")]
    TooFewExamples { needed: usize, available: usize },

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
