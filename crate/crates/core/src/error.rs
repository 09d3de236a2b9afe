//! Error type shared by every module of the crate.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Evaluation time outside a tabulated family's sample range.
    #[error("t = {t} outside tabulated range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    /// A mass function violated positivity.
    #[error("nonpositive mass m{index} at t = {t}: value {value}")]
    NonpositiveMass { index: usize, t: f64, value: f64 },

    /// A precondition on an argument failed.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A matrix failed the symplectic-residual bound.
    #[error("map is not symplectic: residual {residual:.3e} exceeds {bound:.3e}")]
    NotSymplectic { residual: f64, bound: f64 },

    /// A covariance matrix failed the uncertainty bound.
    #[error("unphysical covariance: minimum symplectic eigenvalue {nu_min} below 1/2")]
    Unphysical { nu_min: f64 },

    /// Integration produced a non-finite value.
    #[error("numerical failure at t = {t}: {what}")]
    Numerical { t: f64, what: String },

    /// Fock-space tail population crossed the truncation guard.
    #[error("truncation breach at t = {t}: tail population {tail:.3e} exceeds {limit:.3e}")]
    Truncation { t: f64, tail: f64, limit: f64 },

    /// Operands of incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
