use std::path::Path;

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] prn_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for bad configuration or arguments, 3 for numerical divergence,
    /// 4 for I/O and file-format problems.
    pub fn exit_code(&self) -> u8 {
        use prn_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                E::Diverged { .. } | E::NoConvergence { .. } => 3,
                E::Io(_) | E::Json(_) | E::Format(_) => 4,
                _ => 2,
            },
        }
    }
}
