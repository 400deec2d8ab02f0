use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for {len} blocks")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point outside domain: {0}")]
    Domain(String),

    #[error("step-size regime violation: {0}")]
    RegimeViolation(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("iterates diverged at iteration {iteration} (norm {norm:.3e})")]
    Divergence { iteration: usize, norm: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("config error at line {line} (key `{key}`): {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
