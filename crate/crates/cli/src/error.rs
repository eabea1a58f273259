use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("cannot read {}: {source}", path.display())]
    ReadConfig { path: PathBuf, source: std::io::Error },

    #[error("malformed config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Core(#[from] naggs_core::Error),

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    /// 2 for anything the user can fix in the config or inputs, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        use naggs_core::Error as E;
        match self {
            CliError::Config(_) | CliError::ReadConfig { .. } | CliError::Toml(_) => 2,
            CliError::Core(E::InvalidConfig(_) | E::Dataset { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Config(msg.into()))
}
