use thiserror::Error;

/// Errors raised by the kinetic model and its numerics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mixture internal temperature is undefined when neither species has internal degrees of freedom")]
    DegenerateDof,

    #[error("positivity violated: {quantity} = {value:e} ({hint})")]
    Positivity {
        quantity: &'static str,
        value: f64,
        hint: &'static str,
    },

    #[error("matrix is not symmetric positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotSpd { min_eigenvalue: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("symmetric factorization failed: pivot {pivot:e} below threshold {threshold:e}")]
    Factorization { pivot: f64, threshold: f64 },

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("grid does not cover the distribution: {0}")]
    Coverage(String),

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("integration failure at t = {t}: {reason}")]
    Integration { t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, KineticError>;
