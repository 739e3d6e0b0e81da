use std::path::PathBuf;

/// Failure modes surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes or lengths that cannot be combined.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A parameter value outside its documented domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An operation invoked before its preconditions were established.
    #[error("invalid state: {0}")]
    State(String),

    /// Input data that is structurally valid but unusable (empty split,
    /// single-class labels, non-finite features, ...).
    #[error("bad data: {0}")]
    Data(String),

    /// A malformed image or file payload.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure, with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Donor and recipient networks disagree on a transplanted parameter.
    #[error("transplant mismatch: {0}")]
    Transplant(String),

    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Divergence(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
