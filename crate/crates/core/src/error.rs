use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {value} outside [-1, 1] beyond the clamp band")]
    Domain { value: f64 },

    #[error("kernel family {family} does not support {operation}")]
    UnsupportedFamily {
        family: &'static str,
        operation: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input norm {norm} is not 1 (enable zonal evaluation for non-unit inputs)")]
    NonUnitInput { norm: f64 },

    #[error("gram entry ({row}, {col}): {source}")]
    GramEntry {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integer overflow computing {0}")]
    Overflow(String),

    #[error(
        "quadrature degenerate: resolved mass {resolved} exceeds h(1) = {total} beyond tolerance"
    )]
    QuadratureDegenerate { resolved: f64, total: f64 },

    #[error("quadrature did not converge after {nodes} nodes (last change {change:e})")]
    QuadratureNotConverged { nodes: usize, change: f64 },

    #[error("empty tail: eigenvalue {index} is zero")]
    EmptyTail { index: usize },

    #[error("cutoff {k} is not a degree boundary (boundaries: {boundaries:?})")]
    NotDegreeBoundary { k: usize, boundaries: Vec<usize> },

    #[error("eigensolver failed to converge (condition estimate {condition:e})")]
    EigenNotConverged { condition: f64 },

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("hermite feature overflow: |psi_{index}({x})| exceeds 1e300")]
    HermiteOverflow { index: usize, x: f64 },

    #[error("constraint violated: {0}")]
    Constraint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
