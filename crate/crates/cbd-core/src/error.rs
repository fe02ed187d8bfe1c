//! Error types shared across the toolkit.

use std::path::PathBuf;

use thiserror::Error;

/// Unified error type for container I/O, shape validation, and pipeline
/// configuration.
#[derive(Debug, Error)]
pub enum CbdError {
    /// I/O failure, annotated with the path that caused it.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// File does not start with the expected magic bytes.
    #[error("bad magic bytes {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    /// Container version this build does not understand.
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),

    /// Payload ended before the declared length.
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    /// Payload continues past the declared length.
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(u64),

    /// NaN or infinity where a finite value is required.
    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    /// Declared dimensions whose product does not fit in memory.
    #[error("dimension product overflows usize")]
    DimOverflow,

    /// Structural violation inside a binary container.
    #[error("malformed container: {0}")]
    Format(String),

    /// Tensor or matrix shape differs from what an operation requires.
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    /// Inner dimensions of a matrix product do not line up.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// Input on which the operation is mathematically undefined.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Rejected configuration value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Operation called on a layer stored in an incompatible mode.
    #[error("mode error: {0}")]
    ModeError(String),

    /// Manifest-level validation failure.
    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CbdError>;

impl CbdError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CbdError::Io { path: path.into(), source }
    }
}
