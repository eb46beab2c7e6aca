use thiserror::Error;

/// Failure of one command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: line {line}: {message}")]
    Input { path: String, line: u64, message: String },
    #[error("sampler diagnostic: {0}")]
    Diagnostic(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Diagnostic(_) => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }
}

impl From<relirate::Error> for CliError {
    fn from(e: relirate::Error) -> Self {
        if e.is_diagnostic() {
            CliError::Diagnostic(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
