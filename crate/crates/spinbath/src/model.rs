//! Model parameters, Bloch-vector <-> density-matrix conversions and purity.
//!
//! All couplings are stored in units of the transverse coupling alpha and all
//! times are in units of 1/alpha; [`ModelParams::new`] rescales its inputs
//! once so the finite-N and infinite-N paths share one convention.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Number of bath spins, or the Gaussian-fluctuation limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BathSize {
    Finite(u32),
    Infinite,
}

/// Couplings of the central spin + bath Hamiltonian, in internal units
/// (energies in alpha, inverse temperature in 1/alpha).
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    /// Local field strength, units of alpha.
    pub mu: f64,
    /// Longitudinal system-bath coupling, units of alpha.
    pub gamma: f64,
    /// Intra-bath coupling, units of alpha.
    pub g: f64,
    /// Anisotropy of the intra-bath coupling.
    pub delta: f64,
    /// Inverse temperature, units of 1/alpha (k_B = 1).
    pub beta: f64,
    /// The transverse coupling as originally supplied; times returned to the
    /// caller are in units of 1/alpha_input.
    pub alpha_input: f64,
    pub bath: BathSize,
}

impl ModelParams {
    /// Validates and rescales raw inputs. `alpha` must be positive, `beta`
    /// nonnegative and a finite bath must have an even spin count (half-odd
    /// total spin sectors are not modeled).
    pub fn new(
        mu: f64,
        gamma: f64,
        alpha: f64,
        g: f64,
        delta: f64,
        beta: f64,
        bath: BathSize,
    ) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Unsupported(format!("alpha must be positive, got {alpha}")));
        }
        if beta < 0.0 || !beta.is_finite() {
            return Err(Error::Unsupported(format!("beta must be nonnegative, got {beta}")));
        }
        if let BathSize::Finite(n) = bath {
            if n == 0 || n % 2 != 0 {
                return Err(Error::Unsupported(format!(
                    "bath size must be a positive even integer, got {n}"
                )));
            }
        }
        Ok(Self {
            mu: mu / alpha,
            gamma: gamma / alpha,
            g: g / alpha,
            delta,
            beta: beta * alpha,
            alpha_input: alpha,
            bath,
        })
    }

    pub fn n(&self) -> Option<u32> {
        match self.bath {
            BathSize::Finite(n) => Some(n),
            BathSize::Infinite => None,
        }
    }

    /// g*beta, the combination controlling the thermal Gaussian limit.
    pub fn gb(&self) -> f64 {
        self.g * self.beta
    }

    /// g*beta*delta.
    pub fn gbd(&self) -> f64 {
        self.g * self.beta * self.delta
    }
}

/// Bloch parametrization of a qubit state, rho = (1 + lambda . sigma)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

const NORM_SLACK: f64 = 1e-12;

impl BlochVector {
    pub fn new(l1: f64, l2: f64, l3: f64) -> Result<Self> {
        let b = Self { l1, l2, l3 };
        if b.norm_sq() > 1.0 + NORM_SLACK {
            return Err(Error::InvalidState(format!(
                "Bloch vector norm^2 = {} exceeds 1",
                b.norm_sq()
            )));
        }
        Ok(b)
    }

    pub fn norm_sq(&self) -> f64 {
        self.l1 * self.l1 + self.l2 * self.l2 + self.l3 * self.l3
    }
}

/// A 2x2 density matrix in the (|-(, |+)) basis; rho21 = conj(rho12).
#[derive(Debug, Clone, Copy)]
pub struct DensityMatrix2 {
    pub rho11: f64,
    pub rho22: f64,
    pub rho12: Complex64,
}

impl DensityMatrix2 {
    pub fn new(rho11: f64, rho22: f64, rho12: Complex64) -> Result<Self> {
        if rho11 < -NORM_SLACK || rho22 < -NORM_SLACK {
            return Err(Error::InvalidState(format!(
                "negative population: rho11 = {rho11}, rho22 = {rho22}"
            )));
        }
        if (rho11 + rho22 - 1.0).abs() > NORM_SLACK {
            return Err(Error::InvalidState(format!(
                "trace = {} is not 1",
                rho11 + rho22
            )));
        }
        if rho12.norm_sqr() > rho11 * rho22 + NORM_SLACK {
            return Err(Error::InvalidState(format!(
                "|rho12|^2 = {} exceeds rho11*rho22 = {}",
                rho12.norm_sqr(),
                rho11 * rho22
            )));
        }
        Ok(Self { rho11, rho22, rho12 })
    }
}

/// rho11 = (1 - lambda3)/2, rho12 = (lambda1 - i lambda2)/2.
pub fn bloch_to_density(b: &BlochVector) -> Result<DensityMatrix2> {
    if b.norm_sq() > 1.0 + NORM_SLACK {
        return Err(Error::InvalidState(format!(
            "Bloch vector norm^2 = {} exceeds 1",
            b.norm_sq()
        )));
    }
    DensityMatrix2::new(
        0.5 * (1.0 - b.l3),
        0.5 * (1.0 + b.l3),
        Complex64::new(0.5 * b.l1, -0.5 * b.l2),
    )
}

/// Exact inverse of [`bloch_to_density`].
pub fn density_to_bloch(r: &DensityMatrix2) -> Result<BlochVector> {
    DensityMatrix2::new(r.rho11, r.rho22, r.rho12)?;
    BlochVector::new(2.0 * r.rho12.re, -2.0 * r.rho12.im, r.rho22 - r.rho11)
}

/// tr rho^2 = (1 + |lambda|^2)/2, in [1/2, 1].
pub fn purity(b: &BlochVector) -> f64 {
    0.5 * (1.0 + b.norm_sq())
}
