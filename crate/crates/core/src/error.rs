use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("point {point:?} is outside the chart domain (violates `{condition}`)")]
    OutOfDomain { point: Vec<f64>, condition: String },
    #[error("metric is singular at {point:?}")]
    SingularMetric { point: Vec<f64> },
    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },
    #[error("almost Hermitian structure violated at {point:?}: {what} (residual {residual:e})")]
    IncompatibleStructure {
        point: Vec<f64>,
        what: &'static str,
        residual: f64,
    },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("the n >= 3 Bochner formula is undefined in real dimension {dim}")]
    BranchMismatch { dim: usize },
    #[error("{what} is not available in real dimension {dim}")]
    UnsupportedDimension { dim: usize, what: &'static str },
    #[error("frame construction failed: {0}")]
    FrameBreakdown(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("grid has no points")]
    EmptyGrid,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
