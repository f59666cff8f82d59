use thiserror::Error;

/// Errors raised by the optimization core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FwError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid schedule {label}: g({t}) = {value} (must be finite and >= 2)")]
    InvalidSchedule { label: String, t: u64, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("matrix is rank deficient (estimated rank {rank} of {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("matrix is identically zero")]
    ZeroMatrix,

    #[error("power iteration did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical inconsistency at t = {t}: {detail}")]
    NumericalInconsistency { t: u64, detail: String },

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("insufficient data: {found} usable samples, {required} required")]
    InsufficientData { found: usize, required: usize },
}

pub type Result<T, E = FwError> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(FwError::Dimension { expected, found })
    }
}
