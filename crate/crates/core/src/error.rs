use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative time argument: {0}")]
    NegativeTime(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("circulant embedding has eigenvalue {min_eigenvalue:e} below tolerance and N = {steps} is too large for the dense fallback")]
    EmbeddingFailed { steps: usize, min_eigenvalue: f64 },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("fine grid of {fine} steps is not divisible by {n}")]
    NotDivisible { fine: usize, n: usize },

    #[error("n = {n} must exceed the horizon T = {horizon}")]
    SampleCountTooSmall { n: usize, horizon: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("matrix is not positive semidefinite: minimum eigenvalue {min_eigenvalue:e} below floor {floor:e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64, floor: f64 },

    #[error("cholesky factorization failed after jitter {jitter:e}")]
    FactorizationFailed { jitter: f64 },

    #[error("density is not normalizable: {0}")]
    NonNormalizable(String),

    #[error("drift is not periodic: potential mismatch {mismatch:e} over one period")]
    PeriodicityViolation { mismatch: f64 },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("optimizer failed: all {starts} starts diverged")]
    OptimizationFailed { starts: usize },

    #[error("time {0} is not a node of the quadrature grid")]
    OffGrid(f64),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
