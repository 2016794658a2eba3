use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: a truncated mode needs at least 2 levels")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("truncation tail mass {mass:.3e} exceeds tolerance {tolerance:.1e}")]
    TailOverflow { mass: f64, tolerance: f64 },

    #[error("matrix exponential failed: {0}")]
    ExpmFailure(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("product dimension {dim} exceeds budget {budget}")]
    BudgetExceeded { dim: usize, budget: usize },

    #[error("no local minimum of the variance on (0, 2π]")]
    NoMinimumFound,

    #[error("strain {0:e} is outside the first-order regime (|h| ≤ 1e-2)")]
    StrainTooLarge(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Fails with `InvalidParameter` unless `value` is finite and strictly positive.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and ≥ 0, got {value}")))
    }
}
