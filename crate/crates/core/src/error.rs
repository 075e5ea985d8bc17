use thiserror::Error;

/// Errors produced by the model, spectral and bound computations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CapacityError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shaping filter tap F[{phase},0] is singular (reciprocal condition {rcond:.3e})")]
    SingularShapingTap { phase: usize, rcond: f64 },

    #[error("noise PSD matrix is not positive definite at omega = {omega:.6} (min eigenvalue {min_eig:.3e})")]
    SingularNoise { omega: f64, min_eig: f64 },

    #[error("log-determinant integral diverges: near-zero determinant at omega = {omega:.6}")]
    DivergentIntegral { omega: f64 },

    #[error("eigenvalue {value:.3e} below clamping tolerance at omega = {omega:.6}")]
    NegativeEigenvalue { omega: f64, value: f64 },

    #[error("non-finite value in integrand at node {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, CapacityError>;
