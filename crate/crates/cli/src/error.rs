use std::path::PathBuf;

use thiserror::Error;

/// Failures that stop a subcommand before it can judge its property.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("cannot read config {path}: {source}")]
    ConfigFile { path: PathBuf, source: std::io::Error },
    #[error("config syntax: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Core(#[from] fracperim::Error),
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 3 for configuration problems, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Csv(_) => 4,
            CliError::Core(fracperim::Error::Io(_)) => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
