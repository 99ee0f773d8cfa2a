use std::path::PathBuf;

/// Failures surfaced by the runner and CLI, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Numerical(String),
    #[error("self-check failed: {0}")]
    Check(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for file IO, 1 for numerical or
    /// self-check failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } => 3,
            Self::Numerical(_) | Self::Check(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}

impl From<old3s_core::Error> for CliError {
    fn from(e: old3s_core::Error) -> Self {
        use old3s_core::Error as E;
        match e {
            E::InvalidConfig(_) | E::Empty(_) => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
