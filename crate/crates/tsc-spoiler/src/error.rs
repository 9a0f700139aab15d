use std::io;
use std::path::PathBuf;

/// Errors raised while reading inputs, writing artifacts or running a stage.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("slang rule {index}: {message}")]
    Slang { index: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("artifact mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] tsc_spoiler_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status: 2 for bad invocations (missing inputs, invalid
    /// configuration, mismatched artifacts), 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingInput(_) | Error::Config(_) | Error::Mismatch(_) | Error::Slang { .. } => 2,
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 2,
            Error::Core(tsc_spoiler_core::Error::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}
