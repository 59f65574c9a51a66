use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("level index {0} is not part of the tower")]
    UnknownLevel(usize),

    #[error("cannot project from level {from} down to level {to}: target must not exceed source")]
    InvalidProjection { from: usize, to: usize },

    #[error("invalid tower: {0}")]
    InvalidTower(String),

    #[error("evaluation produced a non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("linear map is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("Christoffel field `{0}` is not flagged symmetric")]
    NotSymmetric(String),

    #[error("quadratic form failed the homogeneity probe (relative residual {residual:e})")]
    NotQuadratic { residual: f64 },

    #[error("chart transition has no inverse map")]
    MissingInverse,

    #[error("unbounded initial data: sup of seminorms is not finite")]
    UnboundedData,

    #[error("missing Lipschitz constant on right-hand side")]
    MissingLipschitz,

    #[error("Picard iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solution blew up at t = {time}")]
    BlowUp {
        time: f64,
        last_state: Vec<f64>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = GeoError> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(GeoError::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
