use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("integration diverged at step {step}: non-finite state {state:?}")]
    IntegrationDiverged { step: usize, state: Vec<f64> },

    #[error("dataset generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("likelihoods are not a normalized distribution: {0:?}")]
    InvalidLikelihoods(Vec<f64>),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("filter diverged: {0}")]
    FilterDiverged(String),

    #[error("malformed linear system file: {0}")]
    MalformedSystem(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("integrity check failed for {path}: {reason}")]
    Integrity { path: PathBuf, reason: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed metadata in {path}: {reason}")]
    Meta { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
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
