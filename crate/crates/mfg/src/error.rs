use thiserror::Error;

/// Everything the command-line layer can fail with, mapped onto exit codes
/// by [`CliError::exit_code`].
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", located(.line, .column, .message))]
    Config { message: String, line: Option<usize>, column: Option<usize> },
    #[error("{0}")]
    Usage(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Core(#[from] mfg_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn located(line: &Option<usize>, column: &Option<usize>, message: &str) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!("config line {l}, column {c}: {message}"),
        (Some(l), None) => format!("config line {l}: {message}"),
        _ => format!("config: {message}"),
    }
}

impl CliError {
    pub fn config(message: impl Into<String>, line: Option<usize>) -> Self {
        CliError::Config { message: message.into(), line, column: None }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged(_) => 2,
            CliError::Core(mfg_core::Error::NewtonFailure { .. }) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
