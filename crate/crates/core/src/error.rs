use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lambda = {lambda} is at or near a pole: sigma_min(A - lambda E) = {sigma:e}")]
    Pole { lambda: Complex64, sigma: f64 },

    #[error("R(lambda) is numerically singular at lambda = {lambda}: sigma_min = {sigma:e}, scale = {scale:e}")]
    SingularR {
        lambda: Complex64,
        sigma: f64,
        scale: f64,
    },

    #[error("companion linearization requires polynomial degree m >= 1, got m = {m}")]
    Degree { m: usize },

    #[error("shifted pencil shift*X + Y is numerically singular at shift = {shift}")]
    ShiftSingular { shift: Complex64 },

    #[error("vector argument must be nonzero")]
    ZeroVector,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("lambda = {lambda} is outside the supported domain: {reason}")]
    Domain { lambda: Complex64, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid realization: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("instance generation failed after {attempts} attempts")]
    Generation { attempts: usize },

    #[error("repeated pole {pole} in scalar pole terms; block merging is not supported")]
    PoleCollision { pole: Complex64 },

    #[error("eigendecomposition did not converge")]
    NoConvergence,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numbers rather than by the input's shape or syntax.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Pole { .. }
                | Error::SingularR { .. }
                | Error::ShiftSingular { .. }
                | Error::Degenerate(_)
                | Error::Domain { .. }
                | Error::NoConvergence
                | Error::Generation { .. }
        )
    }
}
