use std::path::PathBuf;

use gwb_core::GwbError;
use thiserror::Error;

/// Exit code for malformed input and solver errors.
pub const EXIT_INPUT: i32 = 1;
/// Exit code when the multi-marginal tuple cap is exceeded.
pub const EXIT_CAP: i32 = 2;
/// Exit code when a solver stopped before converging; results are still written.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{field}: {message}")]
    Invalid { field: String, message: String },

    #[error(transparent)]
    Solver(#[from] GwbError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(GwbError::TensorCap { .. }) => EXIT_CAP,
            _ => EXIT_INPUT,
        }
    }
}
