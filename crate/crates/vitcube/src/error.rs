use std::path::PathBuf;

/// Failure of a CLI run, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Core {
        context: &'static str,
        #[source]
        source: vitcube_core::Error,
    },
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub const EXIT_USAGE: i32 = 1;
    pub const EXIT_DATA: i32 = 2;
    pub const EXIT_NUMERIC: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => Self::EXIT_USAGE,
            CliError::Core { source, .. } if source.is_numeric() => Self::EXIT_NUMERIC,
            _ => Self::EXIT_DATA,
        }
    }

    pub fn file(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::File { path: path.into(), message: message.to_string() }
    }
}

/// Attaches a module name to core errors.
pub trait CoreContext<T> {
    fn context(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> CoreContext<T> for Result<T, vitcube_core::Error> {
    fn context(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { context: module, source })
    }
}
