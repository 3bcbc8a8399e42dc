use std::io;
use std::path::PathBuf;

pub type Result<T, E = IcredError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum IcredError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {source}", path.display())]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    /// A file parsed but its content is unusable.
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] icred_core::Error),
}

impl IcredError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        IcredError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        IcredError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 3 for numerical failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            IcredError::Core(icred_core::Error::NonFinite(_)) => 3,
            _ => 2,
        }
    }
}
