use std::io;
use std::path::PathBuf;

use biphoton_core::{AnalysisError, NetworkError, OracleError};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    /// Syntax or schema violation; the message carries line and column.
    #[error("{0}")]
    Syntax(String),
    #[error("unsupported schema `{found}` (expected `{expected}`)")]
    Schema {
        found: String,
        expected: &'static str,
    },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("{field}: {source}")]
    Network {
        field: String,
        #[source]
        source: NetworkError,
    },
    #[error("{field}: {source}")]
    Analysis {
        field: String,
        #[source]
        source: AnalysisError,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        #[source]
        source: Box<FormatError>,
    },
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("network has structural errors")]
    Invalid,
    #[error("oracle deviation {deviation:e} exceeds {tolerance:e}")]
    OracleMismatch { deviation: f64, tolerance: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            _ => EXIT_INVALID,
        }
    }
}
