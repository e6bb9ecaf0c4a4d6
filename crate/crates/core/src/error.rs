use std::path::PathBuf;

use thiserror::Error;

use crate::relation::RecordId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dataset `{dataset}` is missing files: {}", display_paths(.missing))]
    MissingData { dataset: String, missing: Vec<PathBuf> },

    #[error("unknown {kind} `{name}`")]
    NotFound { kind: &'static str, name: String },

    #[error("unknown record id {0}")]
    UnknownRecord(RecordId),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown similarity function `{0}`")]
    UnknownFunction(String),

    #[error("missing feature vector for pair {0}")]
    MissingFeatures(crate::relation::PairKey),

    #[error("missing margin for pair {0}")]
    MissingMargin(crate::relation::PairKey),

    #[error("feature arity mismatch: model expects {expected}, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("empty holdout set")]
    EmptyHoldout,

    #[error("label submission rejected: {0}")]
    Submission(String),

    #[error("session has stopped ({0})")]
    Stopped(crate::engine::StopReason),

    #[error("labeler failed: {0}")]
    Labeler(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
}
