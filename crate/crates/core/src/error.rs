use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two inputs that must agree in shape do not.
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// An input collection that must be non-empty is empty.
    Empty(&'static str),
    /// A scalar or configuration value is outside its domain.
    InvalidValue { what: &'static str, detail: String },
    /// A value that must be finite is NaN or infinite.
    NonFinite(&'static str),
    /// The requested operation is not supported for these inputs.
    Unsupported(&'static str),
    /// An iterative solver exhausted its budget before meeting its tolerance.
    NotConverged { iterations: usize, violation: f64 },
    /// An iterative procedure produced a non-finite loss; the trace so far is kept.
    Diverged { step: usize, trace: alloc::vec::Vec<f64> },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidValue {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                what,
                expected,
                found,
            })
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch {
                what,
                expected,
                found,
            } => write!(f, "shape mismatch in {what}: expected {expected}, found {found}"),
            Error::Empty(what) => write!(f, "{what} must not be empty"),
            Error::InvalidValue { what, detail } => write!(f, "invalid {what}: {detail}"),
            Error::NonFinite(what) => write!(f, "{what} must be finite"),
            Error::Unsupported(what) => write!(f, "unsupported: {what}"),
            Error::NotConverged {
                iterations,
                violation,
            } => write!(
                f,
                "not converged after {iterations} iterations (marginal violation {violation:e})"
            ),
            Error::Diverged { step, .. } => write!(f, "non-finite loss at step {step}"),
        }
    }
}

impl core::error::Error for Error {}
