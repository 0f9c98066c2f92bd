use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A tensor or layer was used with incompatible dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Input bytes do not follow the expected file format.
    #[error("format error: {0}")]
    Format(String),

    /// Input ended before the declared payload was complete.
    #[error("truncated input: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },

    /// A model file was written by an unsupported format version.
    #[error("unsupported model format version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },

    /// A configuration value is out of its allowed range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Not enough data to perform the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
