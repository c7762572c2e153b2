use thiserror::Error;

/// Errors raised by the operator algebra and the solvers built on top of it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("label {0} is not part of the host label set")]
    LabelNotInHost(usize),

    #[error("duplicate particle label {0}")]
    DuplicateLabel(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("label sets differ: {left:?} vs {right:?}")]
    LabelMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("operator contains non-finite entries")]
    NonFinite,

    #[error("operator is not hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not symmetric under particle exchange (max deviation {0:.3e})")]
    NotSymmetric(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} is out of range: {value} (allowed {allowed})")]
    OutOfRange { what: &'static str, value: usize, allowed: String },

    #[error("missing sequence component of order {0}")]
    MissingComponent(usize),

    #[error("series does not decay: {0}")]
    NonDecaying(String),

    #[error("step size underflow at t = {t}: local error {error:.3e} above tolerance")]
    StepRejected { t: f64, error: f64 },

    #[error("time {t} is outside the convergence radius t0 = {t0}")]
    BeyondConvergenceRadius { t: f64, t0: f64 },

    #[error("quadrature under-resolved: refinement changed the result by {0:.3e}")]
    UnderResolved(f64),

    #[error("purity lost: |Tr f^2 - 1| = {0:.3e}")]
    PurityLoss(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
