use std::path::{Path, PathBuf};

use qca_core::QcaError;
use thiserror::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configuration or parameters.
    #[error("invalid input: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] QcaError),

    /// Reading or writing `path` failed, or its contents could not be parsed.
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    /// Some scan points failed; the rest completed. Carries the first failure's code.
    #[error("{failed} of {total} scan points failed (first: {first})")]
    PartialScan {
        failed: usize,
        total: usize,
        first: String,
        code: i32,
    },
}

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CAPACITY: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
            CliError::PartialScan { code, .. } => *code,
            CliError::Core(e) => match e {
                QcaError::Domain { .. } | QcaError::Shape { .. } => EXIT_VALIDATION,
                QcaError::Capacity { .. } => EXIT_CAPACITY,
                QcaError::Numerical { .. } | QcaError::Degenerate(_) | QcaError::Estimation(_) => EXIT_NUMERICAL,
                QcaError::Io(_) | QcaError::Format(_) => EXIT_IO,
            },
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    /// Attach `path` to core I/O and format failures.
    pub fn at(path: &Path, err: QcaError) -> Self {
        match err {
            QcaError::Io(m) | QcaError::Format(m) => CliError::io(path, m),
            other => CliError::Core(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
