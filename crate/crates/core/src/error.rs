use thiserror::Error;

use crate::sampling::QueryPlan;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is rank deficient: singular value ratio {ratio:e} below tolerance {tolerance:e}")]
    RankDeficient { ratio: f64, tolerance: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("weight {index} is not strictly positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    MismatchedLengths { expected: usize, got: usize },

    #[error("weight vectors were computed for different exponents ({first} vs {other})")]
    MixedExponents { first: f64, other: f64 },

    #[error("all weights are zero")]
    AllZeroWeights,

    #[error("query budget {tau} exceeds the distribution support size {support}")]
    BudgetExceedsSupport { tau: usize, support: usize },

    #[error("draw cap {cap} reached with only {distinct} of {tau} distinct indices", distinct = partial.distinct.len())]
    CapExceeded {
        cap: usize,
        tau: usize,
        partial: Box<QueryPlan>,
    },

    #[error("sampled index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("query budget tau = {tau} must satisfy 1 <= tau <= n_u = {n_u} (unlabeled pool size)")]
    QueryBudgetInfeasible { tau: usize, n_u: usize },

    #[error("labels are empty")]
    EmptyLabels,

    #[error("class {0} does not occur in the labels")]
    AbsentClass(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label oracle failure: {0}")]
    Oracle(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("{path}: line {line}: {message}")]
    Config { path: String, line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
