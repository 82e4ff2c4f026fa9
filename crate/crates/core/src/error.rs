use std::fmt;

use thiserror::Error;

/// Why a closed-form integral over the exceedance region diverges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum DivergenceReason {
    /// Some principal submatrix of the precision matrix is not positive definite.
    Spectral,
    /// The linear coefficient fails `μᵀ𝟙 > d`.
    Linear,
}

impl fmt::Display for DivergenceReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceReason::Spectral => f.write_str("spectral"),
            DivergenceReason::Linear => f.write_str("linear"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix does not have zero row sums (max |row sum| {max_row_sum:.3e})")]
    NotS1 { max_row_sum: f64 },

    #[error("matrix is not positive semi-definite of rank d-1 with kernel spanned by the ones vector")]
    NotS1Plus,

    #[error("variogram is not strictly conditionally negative definite")]
    NotStrictlyCnd,

    #[error("variogram matrix is numerically singular")]
    SingularVariogram,

    #[error("function is not integrable on the exceedance region ({reason} condition)")]
    NotIntegrable { reason: DivergenceReason },

    #[error("point lies outside the exceedance region")]
    OutsideSupport,

    #[error("point has non-positive coordinates")]
    DomainError,

    #[error("importance proposal covariance is not positive definite")]
    DegenerateProposal,

    #[error("dimension {d} too large for inclusion-exclusion (max {max})")]
    DimensionTooLarge { d: usize, max: usize },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("interaction support graph is not connected")]
    Pi2Violation,
}

impl Error {
    /// Stable machine-readable code for the error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonSymmetric { .. } => "NonSymmetric",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidInput(_) => "InvalidInput",
            Error::NotS1 { .. } => "NotS1",
            Error::NotS1Plus => "NotS1Plus",
            Error::NotStrictlyCnd => "NotStrictlyCND",
            Error::SingularVariogram => "SingularVariogram",
            Error::NotIntegrable { .. } => "NotIntegrable",
            Error::OutsideSupport => "OutsideSupport",
            Error::DomainError => "DomainError",
            Error::DegenerateProposal => "DegenerateProposal",
            Error::DimensionTooLarge { .. } => "DimensionTooLarge",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::Pi2Violation => "Pi2Violation",
        }
    }

    /// Numerical failures (as opposed to invalid or out-of-domain inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularVariogram | Error::NoConvergence { .. } | Error::DegenerateProposal
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
