use thiserror::Error;

/// Errors raised by the numerical kernels, solvers and generators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("data length mismatch: expected {expected}, got {got}")]
    InvalidData { expected: usize, got: usize },

    #[error("non-finite entry at position {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("restricted least squares is rank deficient on a support of size {support}")]
    RankDeficient { support: usize },

    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    #[error("zero gradient: the target vector is orthogonal to the range of the operator")]
    ZeroGradient,

    #[error("no eligible index reaches the dual boundary while the residual is above tolerance")]
    NoCrossing,

    #[error("degenerate random draw: extreme eigenvalues coincide")]
    DegenerateDraw,

    #[error("at least two samples are required, got {0}")]
    TooFewSamples(usize),

    #[error("bound is degenerate: p * lambda = {0} must be < 1")]
    BoundDegenerate(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix file format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
