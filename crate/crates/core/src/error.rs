use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("degenerate spectrum: minimum eigenvalue gap {gap:e} below threshold {threshold:e}")]
    DegenerateSpectrum { gap: f64, threshold: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("quadrature did not converge on [{lo}, {hi}] (estimated error {error:e})")]
    QuadratureFailure { lo: f64, hi: f64, error: f64 },

    #[error("numerical health: {0}")]
    NumericalHealth(String),

    #[error("no positive rate on the curve")]
    NoPositiveRate,
}

pub type Result<T> = std::result::Result<T, Error>;
