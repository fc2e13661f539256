use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unsupported complex dimension {0} (expected 1 or 2)")]
    UnsupportedDimension(usize),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("profile positivity violated at tau = {tau}")]
    PositivityViolated { tau: f64 },
    #[error("point lies on the excluded locus of the chart")]
    ExcludedLocus,
    #[error("tau = {0} is on the boundary of the moment interval")]
    BoundaryPoint(f64),
    #[error("finite-difference stencil leaves the chart")]
    StencilOutsideChart,
    #[error("singular metric")]
    SingularMetric,
    #[error("zero tangent vector")]
    ZeroVector,
    #[error("tensor violates Kähler symmetries by {0:e}")]
    SymmetryViolation(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("holomorphic basis is degenerate (condition number {0:e})")]
    BasisDegenerate(f64),
    #[error("vector field is not holomorphic (dbar-energy ratio {0:e})")]
    NotHolomorphic(f64),
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("CFL guard violated: dt = {dt:e} exceeds limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("positivity lost at step {step}, tau = {tau}")]
    PositivityLoss { step: usize, tau: f64 },
    #[error("insufficient samples: need {need}, have {have}")]
    InsufficientSamples { need: usize, have: usize },
    #[error("non-positive value {value:e} at t = {t}")]
    NonPositive { t: f64, value: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
