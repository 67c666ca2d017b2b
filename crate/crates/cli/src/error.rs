use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Failure classes with their process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("sampler: {0}")]
    Sampler(String),

    #[error("oracle check failed: {0}")]
    Oracle(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Sampler(_) => 3,
            CliError::Oracle(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<lcnn::Error> for CliError {
    fn from(e: lcnn::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else if let lcnn::Error::Io(io) = e {
            CliError::Io(io)
        } else {
            CliError::Sampler(e.to_string())
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv: {e}"))
    }
}

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
