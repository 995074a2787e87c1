use thiserror::Error;

/// Errors raised while building or evaluating bodies, gauges and integrals.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChordError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("radial function is not positive ({value:e}); the body is invalid")]
    NonPositiveRadial { value: f64 },

    #[error("matrix is singular (det = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gauge argument must be positive, got {0:e}")]
    NonPositiveArgument(f64),

    #[error("{what} did not converge within {iterations} iterations")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
    },

    #[error("all combination coefficients are zero")]
    ZeroCoefficients,

    #[error("index i = {i} out of range for dimension {n} (need 0 <= i < n)")]
    IndexOutOfRange { i: usize, n: usize },

    #[error("expected {expected} bodies, got {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("tabulated body bound to rule `{rule_id}` queried off its nodes")]
    OffRule { rule_id: String },

    #[error("chord additions nested deeper than {max}")]
    NestingTooDeep { max: usize },

    #[error("sign check failed: {0}")]
    SignViolation(String),

    #[error("unit direction has norm {norm}")]
    NotUnit { norm: f64 },
}

pub type Result<T, E = ChordError> = std::result::Result<T, E>;
