use thiserror::Error;

/// Errors raised anywhere in the reconstruction stack.
#[derive(Debug, Error)]
pub enum SmrdError {
    #[error("zero-sized image dimension ({height}x{width})")]
    EmptyShape { height: usize, width: usize },

    #[error("data length {len} does not match shape {height}x{width}")]
    DataLength {
        len: usize,
        height: usize,
        width: usize,
    },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("coil count mismatch: expected {expected}, found {found}")]
    CoilMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step {t} out of range for a schedule of {total} steps")]
    StepOutOfRange { t: usize, total: usize },

    #[error("mask generation failed: {0}")]
    Mask(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("bad magic: expected \"SMRD\"")]
    BadMagic,

    #[error("unsupported tensor file version {0}")]
    UnsupportedVersion(u32),

    #[error("unknown dtype tag {0}")]
    UnknownDtype(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("truncated header")]
    TruncatedHeader,

    #[error("tensor dtype/rank does not match the requested type: {0}")]
    TensorKind(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SmrdError>;
