use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{module}::{operation} failed: {source}")]
    Numerical {
        module: &'static str,
        operation: &'static str,
        #[source]
        source: maclim::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Tags a library error with the module and operation that raised it.
pub(crate) trait Numerical<T> {
    fn during(self, module: &'static str, operation: &'static str) -> std::result::Result<T, CliError>;
}

impl<T> Numerical<T> for maclim::Result<T> {
    fn during(self, module: &'static str, operation: &'static str) -> std::result::Result<T, CliError> {
        self.map_err(|source| CliError::Numerical {
            module,
            operation,
            source,
        })
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
