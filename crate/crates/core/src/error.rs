use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    /// A constructor or operation received an argument outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Shapes of states, matrices or parameter arrays do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A theorem-level hypothesis failed; the analysis refuses rather than
    /// returning a meaningless number. The message carries the diagnostic.
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    /// A numerical routine (eigensolver, root finder, bracketing) failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The integrator met a non-finite state. `t_last` is the last time at
    /// which the state was still finite.
    #[error("integration aborted at t = {t_last}: {reason}")]
    IntegrationAborted { t_last: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, CoreError>;
