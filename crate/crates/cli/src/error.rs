use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] obdf_sqd::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Csv { path: PathBuf, msg: String },
    #[error("reference label {0:?} matches no scan row")]
    LabelMismatch(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
