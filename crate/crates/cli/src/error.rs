use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in {field}: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Core(#[from] twoscale_core::Error),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    /// 2 for bad input, 3 for numerical consistency failures, 4 for failed
    /// acceptance criteria.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(twoscale_core::Error::Config { .. }) => 2,
            CliError::Core(_) => 3,
            CliError::ValidationFailed(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
