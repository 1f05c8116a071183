use thiserror::Error;

/// Errors reported by the discretization, analysis and solver routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point} outside domain [{lower}, {upper}]")]
    OutOfDomain { point: f64, lower: f64, upper: f64 },

    #[error("matrix too small: size {size}, need at least {required}")]
    TooSmall { size: usize, required: usize },

    #[error("singular system (smallest singular value or pivot {smallest:e})")]
    Singular { smallest: f64 },

    #[error("shifted spatial block {block} singular for shift {shift}")]
    SingularShiftedBlock { block: usize, shift: num_complex::Complex64 },

    #[error("iteration did not converge: {what} (defect {defect:e})")]
    NoConvergence { what: String, defect: f64 },

    #[error("numerical consistency check failed: {0}")]
    Consistency(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
