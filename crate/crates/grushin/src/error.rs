use thiserror::Error;

/// Errors surfaced by the library. The CLI maps these onto process exit
/// codes: I/O failures -> 1, configuration/validation failures -> 2,
/// numerical non-convergence -> 3.
#[derive(Debug, Error)]
pub enum GrushinError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration rejected: {0}")]
    ConfigValidation(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error(
        "quadrature did not converge in {context}: refinement disagreement {disagreement:.3e} exceeds {tolerance:.3e}"
    )]
    QuadratureNonConvergence {
        context: String,
        disagreement: f64,
        tolerance: f64,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, GrushinError>;
