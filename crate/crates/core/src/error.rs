use thiserror::Error;

/// Errors raised by the landscape library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix is not unitary (residual {0:e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (residual {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not skew-Hermitian (residual {0:e})")]
    NotSkewHermitian(f64),

    #[error("vector is not tangent at the base point (residual {0:e})")]
    NotTangent(f64),

    #[error("eigen-solver failed: {0}")]
    EigenFailure(String),

    #[error("inconsistent landscape: {0}")]
    InvalidLandscape(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid stratum signature: {0}")]
    InvalidSignature(String),

    #[error("finite-difference step {0:e} outside [1e-7, 1e-2]")]
    StepSize(f64),

    #[error("critical-point self-check failed: {0}")]
    CriticalCheck(String),

    #[error("secular equation bracket failure: {0}")]
    Bracket(String),

    #[error("Dyson order {0} exceeds the guard of 12")]
    OrderGuard(usize),

    #[error("control-to-propagator differential is rank deficient: rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("point is not critical: gradient norm {0:e}")]
    NotCritical(f64),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
