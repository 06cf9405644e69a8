use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit codes: `Usage` is a
/// caller mistake (exit 1), everything else is a runtime failure (exit 2).
#[derive(Debug, Error)]
pub enum DrlError {
    /// A documented precondition of an operation was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Bad user input: unknown config key, malformed override, missing file.
    #[error("usage error: {0}")]
    Usage(String),

    /// Training-time failure (non-finite loss, model divergence).
    #[error("training error: {0}")]
    Training(String),

    /// A tractability guard rejected the requested computation.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("serialization error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DrlError {
    pub fn contract(msg: impl Into<String>) -> Self {
        DrlError::Contract(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        DrlError::Usage(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, DrlError>;
