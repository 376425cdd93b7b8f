//! Experiment files, scans and reports for the biphoton interferometer
//! simulator.

pub mod commands;
pub mod error;
pub mod experiment;

pub use error::{CliError, FormatError, EXIT_INVALID, EXIT_IO, EXIT_OK};
pub use experiment::{parse_str, Experiment, ExperimentFile, SCHEMA};

use std::path::Path;

/// Reads and parses an experiment file. Unreadable files are I/O errors.
pub fn load(path: &Path) -> Result<Experiment, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_str(&text).map_err(|source| CliError::Format {
        path: path.to_owned(),
        source: Box::new(source),
    })
}
