use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the detection toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate secant set: {0}")]
    DegenerateSecants(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix is rank deficient (column {column} has residual norm {residual:.3e})")]
    RankDeficient { column: usize, residual: f64 },

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("insufficient rare-class points: have {have}, need at least {need}")]
    InsufficientRare { have: usize, need: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
