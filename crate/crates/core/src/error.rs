use thiserror::Error;

/// Errors raised by the index engine, the orbit finder and the verifier.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SilError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not symplectic (defect {defect:.3e} > {tol:.1e})")]
    NotSymplectic { defect: f64, tol: f64 },

    #[error("integration accuracy: symplectic drift {drift:.3e} exceeds {tol:.1e} at t = {time:.6}; use more steps")]
    IntegrationAccuracy { drift: f64, tol: f64, time: f64 },

    #[error("numerical resolution: {0}")]
    Resolution(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("singular point: {0}")]
    Singularity(String),

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("not a solution: {0}")]
    NotASolution(String),

    #[error("tolerance: {0}")]
    Tolerance(String),

    #[error("invalid input: {0}")]
    Input(String),
}

impl SilError {
    /// Whether the error stems from malformed input rather than numerics.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            SilError::Dimension(_) | SilError::Domain(_) | SilError::Input(_) | SilError::Unsupported(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, SilError>;
