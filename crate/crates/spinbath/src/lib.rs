//! Exact reduced dynamics of a spin-1/2 coupled to a finite or infinite
//! anisotropic Heisenberg spin bath in thermal equilibrium.
//!
//! The crate computes Bloch-vector trajectories, purity and decoherence
//! scales along two independent routes for every regime:
//!
//! * [`finite`] — exact finite-N sector sums from the diagonalized evolution
//!   operator, backed by the log-space thermal tables in [`bath`];
//! * [`infinite`] — the N -> infinity Gaussian-fluctuation limit, with closed
//!   forms built on the special-function kernels in [`special`] and
//!   Gauss-Hermite x Gauss-Laguerre quadrature cross-checks;
//! * [`oracle`] — dense per-sector diagonalization and seeded Monte Carlo,
//!   the ground-truth engines the analytic paths are tested against.

pub mod bath;
pub mod error;
pub mod finite;
pub mod infinite;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod special;

pub use error::{Error, Result};
pub use model::{BathSize, BlochVector, DensityMatrix2, ModelParams};
