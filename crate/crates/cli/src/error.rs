use std::fmt;

/// Failure classes with their exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Exit 1: an analysis, I/O or threshold failure.
    Failed(String),
    /// Exit 2: the configuration or invocation is invalid.
    Config(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Failed(m) => write!(f, "error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<seqtreat::Error> for CliError {
    fn from(e: seqtreat::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Failed(format!("csv: {e}"))
    }
}
