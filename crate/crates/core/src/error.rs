use thiserror::Error;

/// Errors produced by the solvers, the synthesis pipeline and the analysis layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimensions are inconsistent: {0}")]
    DimensionMismatch(String),

    #[error("matrix entries must be finite: {0}")]
    NonFinite(String),

    #[error("matrix expected symmetric (asymmetry {0:.3e} exceeds 1e-12)")]
    NotSymmetric(f64),

    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),

    #[error("innovation matrix is singular or not invertible")]
    SingularInnovation,

    #[error("Stein equation requires a strictly stable operator (rho = {0})")]
    UnstableOperator(f64),

    #[error("Sylvester-Stein equation requires rho(A)*rho(B) < 1 (got {0})")]
    UnstablePair(f64),

    #[error("resolvent (zI - A) is singular at omega = {0}")]
    SingularResolvent(f64),

    #[error("R_Q = gamma^2 I + L Q L* is not positive definite (gamma too small)")]
    IndefiniteRQ,

    #[error("bisection bracket invalid or condition not monotone: {0}")]
    BracketFailure(String),

    #[error("Nehari pencil (I - F_P Z F_P* Pi) is numerically singular")]
    SingularPencil,

    #[error("H-infinity level {0} is infeasible")]
    Infeasible(f64),

    #[error("quadrature did not converge within the refinement cap")]
    NonConvergedQuadrature,

    #[error("iteration limit exceeded in {0}")]
    IterationLimit(&'static str),

    #[error("model file rejected: {0}")]
    ModelFormat(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
