//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A state (Bloch vector or density matrix) violates a physical invariant.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Parameters outside the supported domain (odd bath size, alpha <= 0, ...).
    #[error("unsupported parameters: {0}")]
    Unsupported(String),

    /// The infinite-N limit does not exist for these parameters.
    #[error("divergent Gaussian limit: g*beta = {gb} and g*beta*delta = {gbd} must both exceed -2")]
    Divergent { gb: f64, gbd: f64 },

    /// Argument outside a kernel's domain (pole, branch cut, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An input that would overflow; the caller should switch to a damped form.
    #[error("overflow risk: {0}; use damped_erf_pair instead")]
    OverflowRisk(String),

    /// A quadrature or iteration failed to reach the requested tolerance.
    #[error("tolerance failure in {context}: last two estimates {prev} and {last}")]
    ToleranceFailure {
        context: &'static str,
        prev: f64,
        last: f64,
    },

    /// The QL eigenvalue iteration did not converge.
    #[error("eigensolver failed to converge after {0} iterations")]
    EigenFailure(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
