use std::path::Path;

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Model(String),
    #[error("{0}")]
    Io(String),
    /// Some inputs were skipped under `--keep-going`.
    #[error("{0}")]
    Partial(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Model(_) => 5,
            CliError::Io(_) => 6,
            CliError::Partial(_) => 7,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<graphomotor::boost::BoostError> for CliError {
    fn from(e: graphomotor::boost::BoostError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<graphomotor::stats::StatsError> for CliError {
    fn from(e: graphomotor::stats::StatsError) -> Self {
        CliError::Model(e.to_string())
    }
}
