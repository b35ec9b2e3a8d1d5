use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Model(rendezvous_core::Error),
    #[error("no deployment satisfying the spanning-tree and separation checks after {attempts} attempts")]
    DeploymentExhausted { attempts: u32 },
    #[error("{0}")]
    MissingInput(String),
    #[error("{count} monitor violation(s); first: {first}")]
    Violation { count: usize, first: String },
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit status: 1 parse or validation, 2 spanning-tree
    /// assumption, 3 strict-mode monitor violation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(rendezvous_core::Error::NoSpanningTree { .. })
            | CliError::DeploymentExhausted { .. } => 2,
            CliError::Violation { .. } => 3,
            _ => 1,
        }
    }
}

impl From<rendezvous_core::Error> for CliError {
    fn from(e: rendezvous_core::Error) -> Self {
        CliError::Model(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
