use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Parse(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] krotov_core::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Config(_) => 2,
            CliError::Core(krotov_core::Error::Config(_))
            | CliError::Core(krotov_core::Error::DataFile { .. })
            | CliError::Core(krotov_core::Error::Admissibility(_)) => 2,
            CliError::Core(krotov_core::Error::Io { .. }) | CliError::Io { .. } => 4,
            CliError::Core(_) => 3,
        }
    }
}
