use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared across the crate. Diagnostic magnitudes are carried as
/// `f64` regardless of the scalar type the solve ran in.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("objective {objective} returned a non-finite {what}")]
    Evaluation {
        objective: usize,
        what: &'static str,
    },

    #[error("weighted Hessian is not positive definite")]
    SingularMetric,

    #[error("inner proximal-gradient solve stalled after {iterations} iterations (fixed-point residual {residual:e})")]
    InnerNonConvergence { iterations: usize, residual: f64 },

    #[error("dual ascent stopped after {iterations} iterations with gap {gap:e} above tolerance {tol:e}")]
    DualNonConvergence {
        iterations: usize,
        gap: f64,
        tol: f64,
    },

    #[error("line search found no acceptable step after {halvings} reductions")]
    LineSearchFailure { halvings: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}
