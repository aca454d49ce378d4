use std::path::PathBuf;

/// Errors produced by the library.
///
/// The variants line up with the CLI exit-code contract: `Usage` maps to
/// exit 1, everything else that concerns inputs maps to exit 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller-side mistake: mismatched dimensions, invalid parameters.
    #[error("usage error: {0}")]
    Usage(String),
    /// Input data violates a contract (missing predictions, infeasible pairs, ...).
    #[error("data error: {0}")]
    Data(String),
    /// The requested configuration is outside what the library computes.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed csv in {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the invocation rather than the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}

pub(crate) fn check_len(what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::usage(format!(
            "{what}: expected length {expected}, got {actual}"
        )));
    }
    Ok(())
}
