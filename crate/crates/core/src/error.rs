use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("missing matrix file {path} for block {key}")]
    MissingFile { path: PathBuf, key: String },

    #[error("shape mismatch in {path} for block {key}: manifest declares {expected}, file has {found}")]
    FileShape {
        path: PathBuf,
        key: String,
        expected: String,
        found: String,
    },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("inconsistent shared dimension: block {key} has P={found}, expected P={expected}")]
    InconsistentSharedDim {
        key: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate block key {key}")]
    DuplicateKey { key: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-smooth point: {0}")]
    NonSmoothPoint(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("missing block {key} in {split} split")]
    MissingBlock { key: String, split: String },

    #[error("empty selection table for K={0}")]
    EmptyTable(usize),

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
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
