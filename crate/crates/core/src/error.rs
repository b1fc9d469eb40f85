use alloc::string::String;
use core::fmt;

/// Errors produced by the purification core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands disagree on a dimension.
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// A value outside its admissible domain.
    InvalidArgument(String),
    /// An entry that must be finite is NaN or infinite.
    NonFinite { what: &'static str, index: usize },
    /// The Gram matrix of a ridge system is not positive definite.
    Singular { pivot: usize },
    /// A class index is out of range.
    LabelOutOfRange { index: usize, label: usize, classes: usize },
    /// An error raised inside the purification loop, with its position.
    AtIteration {
        epoch: usize,
        iteration: u64,
        source: alloc::boxed::Box<Error>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { op, expected, found } => write!(
                f,
                "{op}: dimension mismatch, expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonFinite { what, index } => {
                write!(f, "non-finite value in {what} at flat index {index}")
            }
            Error::Singular { pivot } => {
                write!(f, "matrix is singular or not positive definite (pivot {pivot})")
            }
            Error::LabelOutOfRange { index, label, classes } => {
                write!(f, "label {label} at position {index} is outside [0, {classes})")
            }
            Error::AtIteration {
                epoch,
                iteration,
                source,
            } => {
                write!(f, "epoch {epoch}, iteration {iteration}: {source}")
            }
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::AtIteration { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
