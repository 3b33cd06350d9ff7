use thiserror::Error;

/// Failure of a subcommand, split by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration or missing inputs; exit status 2.
    #[error("{0}")]
    Config(String),
    /// Failure while running; exit status 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<radar_depth::Error> for CliError {
    fn from(e: radar_depth::Error) -> Self {
        CliError::Runtime(crate::config::one_line(&e.to_string()))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
