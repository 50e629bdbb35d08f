use std::path::{Path, PathBuf};

use npmon_core::Error;

/// Failures of a command, each mapped to a distinct process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing artifact {path}: {reason}")]
    Missing { path: PathBuf, reason: String },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("integrity failure: {0}")]
    Integrity(String),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn missing(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Missing {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Missing { .. } => 3,
            CliError::Numeric(_) => 4,
            CliError::Integrity(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidArgument(_)
            | Error::UnknownModel(_)
            | Error::MalformedSystem(_)
            | Error::InsufficientData(_)
            | Error::Shape(_) => CliError::Config(msg),
            Error::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => CliError::Missing {
                path,
                reason: source.to_string(),
            },
            Error::IntegrationDiverged { .. }
            | Error::GenerationFailed { .. }
            | Error::Numerical(_)
            | Error::InvalidLikelihoods(_)
            | Error::FilterDiverged(_) => CliError::Numeric(msg),
            Error::Integrity { .. } | Error::Version { .. } | Error::Meta { .. } => CliError::Integrity(msg),
            Error::Io { .. } => CliError::Other(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
