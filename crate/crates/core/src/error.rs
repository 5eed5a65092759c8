use thiserror::Error;

use crate::data::SolverTrace;
use crate::Real;

/// Errors raised when building or combining datasets and parameter sets.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dataset must contain at least one point and one dimension (n = {n}, d = {d})")]
    Empty { n: usize, d: usize },
    #[error("non-finite covariate at point {point}, coordinate {coord}")]
    NonFinite { point: usize, coord: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] IoErrorKind),
}

/// `std::io::Error` is not `Clone`/`PartialEq`, so only its rendered form is kept.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("i/o: {0}")]
pub struct IoErrorKind(pub String);

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(IoErrorKind(e.to_string()))
    }
}

impl DataError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        DataError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Errors raised by the solvers.
#[derive(Debug, Error)]
pub enum SolveError<T: Real> {
    #[error(transparent)]
    Data(#[from] DataError),
    /// The weighted normal matrix is not numerically positive definite.
    #[error("singular weighted normal system (smallest pivot {pivot:e})")]
    SingularSystem { pivot: f64 },
    /// An inner loop used its whole iteration budget without meeting the
    /// stage exit threshold. The partial trace is kept.
    #[error("stage {stage} did not settle within {iterations} inner iterations")]
    NonProgress {
        stage: usize,
        iterations: usize,
        trace: Box<SolverTrace<T>>,
    },
}

impl<T: Real> SolveError<T> {
    /// Trace recorded up to the failure, if the solver got that far.
    pub fn partial_trace(&self) -> Option<&SolverTrace<T>> {
        match self {
            SolveError::NonProgress { trace, .. } => Some(trace),
            _ => None,
        }
    }

    pub fn into_partial_trace(self) -> Option<SolverTrace<T>> {
        match self {
            SolveError::NonProgress { trace, .. } => Some(*trace),
            _ => None,
        }
    }
}
