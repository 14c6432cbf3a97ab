use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("time {value}s is outside the timeline (total duration {bound}s)")]
    Range { value: f64, bound: f64 },

    /// The host is missing something the operation needs (a transcoder, a readable file).
    #[error("environment error: {message}{}", remedy.as_ref().map(|r| format!("; {r}")).unwrap_or_default())]
    Environment { message: String, remedy: Option<String> },

    #[error("transcoder exited with {status}: {diagnostics}")]
    Transcoder { status: String, diagnostics: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("fetch of {what} failed after {attempts} attempt(s): {message}")]
    Fetch {
        what: String,
        attempts: u32,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

/// Scoring backend failures. `NotConfigured` means the backend could never
/// run; `Crashed` means it started and then failed mid-batch.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend not configured: {0}")]
    NotConfigured(String),
    #[error("backend crashed: {0}")]
    Crashed(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn env(message: impl Into<String>) -> Self {
        Error::Environment {
            message: message.into(),
            remedy: None,
        }
    }
}

/// Attach a path to `std::io::Result`s.
pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}
