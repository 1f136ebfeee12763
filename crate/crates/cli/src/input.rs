use std::fs;
use std::path::Path;

use fex_core::extremal::BodySpec;
use fex_core::pencil::MatrixTuple;

use crate::error::CliError;

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn load_body(path: &Path, truncation: Option<usize>) -> Result<BodySpec, CliError> {
    Ok(BodySpec::detect(&read(path)?, truncation)?)
}

pub fn load_tuple(path: &Path) -> Result<MatrixTuple, CliError> {
    Ok(MatrixTuple::from_json(&read(path)?)?)
}
