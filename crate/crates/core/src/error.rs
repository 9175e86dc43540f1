use alloc::string::String;
use core::fmt;

/// Errors surfaced by the training core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A feature vector or gradient had the wrong length/shape.
    DimensionMismatch { expected: usize, got: usize },
    /// An operation that needs at least one element got none.
    EmptyInput(&'static str),
    /// Dataset too small for the requested operation.
    DatasetTooSmall { len: usize, min: usize },
    /// A gradient handed to the optimizer contained NaN or infinity.
    NonFiniteGradient { step: u64 },
    /// Configuration value out of range.
    InvalidConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::DatasetTooSmall { len, min } => {
                write!(f, "dataset too small: {len} examples, need at least {min}")
            }
            Error::NonFiniteGradient { step } => {
                write!(f, "non-finite gradient entry at optimizer step {step}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
