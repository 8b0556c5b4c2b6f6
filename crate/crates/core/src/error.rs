use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("no eligible candidate for node {0}")]
    NoCandidate(usize),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("replica {replica} (seed {seed}) of cell eta={eta}, mu={mu} failed: {source}")]
    Replica {
        eta: f64,
        mu: f64,
        replica: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
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
