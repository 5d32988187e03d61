use thiserror::Error;

/// Errors raised by the library. Failed constraint checks are not errors;
/// they are reported through [`crate::ConstraintReport`].
#[derive(Debug, Error)]
pub enum Error {
    /// The input does not describe a complete behavior or free set.
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),

    /// The correlation form of the CHSH sum and its free-probability form
    /// disagree, which only happens when a setting block is not normalized.
    #[error(
        "CHSH sum forms disagree: correlations give {correlation_form}, \
         free probabilities give {free_sum_form}; the behavior is not normalized"
    )]
    NormalizationDefect {
        correlation_form: f64,
        free_sum_form: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid quantum model: {0}")]
    InvalidModel(String),

    /// An internal floating-point consistency check failed.
    #[error("numerical consistency failure: {0}")]
    Numerical(String),

    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_tolerance(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTolerance(tol))
    }
}
