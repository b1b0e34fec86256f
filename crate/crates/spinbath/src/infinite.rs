//! Reduced dynamics in the N -> infinity Gaussian-fluctuation limit:
//! Gaussian-measure expectations, the closed forms eta/zeta/xi, quadrature
//! evaluators for gamma != 0 and cross-checks, asymptotics, short-time laws
//! and decoherence times.
//!
//! Routing: gamma = 0 and mu > 0 use the closed forms; gamma = 0 with mu = 0
//! uses the radial quadrature (the Gamma(0, .) branch degenerates at mu = 0);
//! gamma != 0 substitutes mu -> mu + gamma m and integrates over m as well.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::finite::{check_time_grid, Trajectory};
use crate::model::{BlochVector, ModelParams};
use crate::numerics::{gauss_rule, pairwise_sum_fn, GaussKind};
use crate::special::{exp_e1, faddeeva_w, gamma0_scaled, m_function};

const PI: f64 = std::f64::consts::PI;

/// Parameters surviving the N -> infinity limit.
#[derive(Debug, Clone, Copy)]
pub struct GaussLimitParams {
    /// Local field, units of alpha.
    pub mu: f64,
    /// Longitudinal coupling, units of alpha.
    pub gamma: f64,
    /// g * beta.
    pub gb: f64,
    /// g * beta * delta.
    pub gbd: f64,
}

impl GaussLimitParams {
    pub fn new(mu: f64, gamma: f64, gb: f64, gbd: f64) -> Result<Self> {
        if gb <= -2.0 || gbd <= -2.0 {
            return Err(Error::Divergent { gb, gbd });
        }
        Ok(Self { mu, gamma, gb, gbd })
    }

    pub fn from_model(p: &ModelParams) -> Result<Self> {
        Self::new(p.mu, p.gamma, p.gb(), p.gbd())
    }
}

/// Zbar = 2 sqrt 2 / ((2 + g beta) sqrt(2 + g beta delta)).
pub fn zbar(p: &GaussLimitParams) -> f64 {
    2.0 * 2.0f64.sqrt() / ((2.0 + p.gb) * (2.0 + p.gbd).sqrt())
}

/// Tensor-quadrature controls for the Gaussian-measure integrals.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Gauss-Hermite order for the m integral.
    pub hermite_order: usize,
    /// Gauss-Laguerre order for the r^2 integral.
    pub laguerre_order: usize,
    /// Successive refinements must agree to this absolute tolerance.
    pub abs_tol: f64,
    /// Number of order-doubling refinements allowed.
    pub max_refine: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            hermite_order: 64,
            laguerre_order: 64,
            abs_tol: 1e-10,
            max_refine: 3,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hermite_order < 8 || self.laguerre_order < 8 {
            return Err(Error::Unsupported(
                "quadrature orders must be at least 8".into(),
            ));
        }
        if self.abs_tol < 1e-13 {
            return Err(Error::Unsupported(
                "quadrature abs_tol below 1e-13 is not resolvable in f64".into(),
            ));
        }
        Ok(())
    }
}

/// Doubling-refinement ladder driving any quadrature estimate.
fn refine<F: Fn(usize) -> Result<f64>>(
    q: &QuadratureSpec,
    context: &'static str,
    eval: F,
) -> Result<f64> {
    q.validate()?;
    let mut scale = 1usize;
    let mut prev = eval(scale)?;
    for _ in 0..q.max_refine {
        scale *= 2;
        let next = eval(scale)?;
        if (next - prev).abs() < q.abs_tol {
            return Ok(next);
        }
        prev = next;
    }
    let last = eval(scale * 2)?;
    if (last - prev).abs() < q.abs_tol {
        return Ok(last);
    }
    Err(Error::ToleranceFailure {
        context,
        prev,
        last,
    })
}

/// The transformed expectation
/// <f> = Zbar^{-1} 4 (2/pi)^{1/2} int dm int r dr f(r^2, m) e^{-2(m^2+r^2)},
/// evaluated by Gauss-Hermite x Gauss-Laguerre tensor quadrature with
/// order-doubling refinement. The Boltzmann reweighting belongs inside `f`.
pub fn expectation<F: Fn(f64, f64) -> f64 + Sync>(
    f: F,
    p: &GaussLimitParams,
    q: &QuadratureSpec,
) -> Result<f64> {
    let zb = zbar(p);
    refine(q, "tensor expectation", |scale| {
        let hermite = gauss_rule(GaussKind::Hermite, q.hermite_order * scale)?;
        let laguerre = gauss_rule(GaussKind::Laguerre, q.laguerre_order * scale)?;
        // m = x/sqrt 2, r^2 = u/2: the Gaussian and radial measures reduce to
        // the canonical weights with a residual 1/sqrt(pi)
        let total = pairwise_sum_fn(hermite.nodes.len(), |i| {
            let m = hermite.nodes[i] / 2.0f64.sqrt();
            let inner = pairwise_sum_fn(laguerre.nodes.len(), |k| {
                laguerre.weights[k] * f(laguerre.nodes[k] / 2.0, m)
            });
            hermite.weights[i] * inner
        });
        Ok(total / (zb * PI.sqrt()))
    })
}

/// Radial-only expectation used on the gamma = 0 path, where the m integrals
/// of numerator and denominator cancel analytically:
/// <h>_r = int r dr h(r^2) e^{-(2+gb) r^2} / int r dr e^{-(2+gb) r^2}.
fn radial_expectation<F: Fn(f64) -> f64 + Sync>(
    h: F,
    p: &GaussLimitParams,
    q: &QuadratureSpec,
    context: &'static str,
) -> Result<f64> {
    let c = 2.0 + p.gb;
    refine(q, context, |scale| {
        let laguerre = gauss_rule(GaussKind::Laguerre, q.laguerre_order * scale)?;
        let num = pairwise_sum_fn(laguerre.nodes.len(), |k| {
            let r2 = laguerre.nodes[k] / 2.0;
            laguerre.weights[k] * h(r2) * (-p.gb * r2).exp()
        });
        Ok(num * c / 2.0)
    })
}

// ---------------------------------------------------------------------------
// Closed forms (gamma = 0).
// ---------------------------------------------------------------------------

/// Im[e^{-2 i mu t} w(-tau + i a)], the single Faddeeva evaluation behind all
/// three closed forms; equals -e^{a^2-tau^2} Im erf(a + i tau).
fn damped_im(a: f64, tau: f64, mu_t: f64) -> f64 {
    (Complex64::new(0.0, -2.0 * mu_t).exp() * faddeeva_w(Complex64::new(-tau, a))).im
}

fn require_gamma_zero(p: &GaussLimitParams, what: &'static str) -> Result<()> {
    if p.gamma != 0.0 {
        return Err(Error::Unsupported(format!(
            "{what} is the gamma = 0 closed form; use the quadrature path"
        )));
    }
    Ok(())
}

/// Closed form of eta(t) (gamma = 0, mu > 0): the five printed terms with the
/// exp * Gamma products fused so nothing overflows.
pub fn eta_closed(t: f64, p: &GaussLimitParams) -> Result<f64> {
    require_gamma_zero(p, "eta_closed")?;
    if p.mu <= 0.0 {
        return Err(Error::Domain(
            "eta_closed needs mu > 0; route mu = 0 through eta_quadrature".into(),
        ));
    }
    let c = 2.0 + p.gb;
    let a = p.mu * c.sqrt();
    let tau = t / c.sqrt();
    let x = c * p.mu * p.mu;
    let imw = damped_im(a, tau, p.mu * t);
    let term1 = 1.0 - (2.0 * p.mu * t).cos();
    let term2 = -t * (PI / c).sqrt() * imw;
    let term3 = -x * exp_e1(x)?;
    let term4 = x * gamma0_scaled(Complex64::new(x, 2.0 * p.mu * t))?.re;
    let term5 = p.mu * p.mu * m_function(t, p.mu, p.gb)?;
    Ok(term1 + term2 + term3 + term4 + term5)
}

/// Closed form of zeta(t) (gamma = 0; mu = 0 allowed).
pub fn zeta_closed(t: f64, p: &GaussLimitParams) -> Result<f64> {
    require_gamma_zero(p, "zeta_closed")?;
    let c = 2.0 + p.gb;
    let imw = damped_im(p.mu * c.sqrt(), t / c.sqrt(), p.mu * t);
    Ok((2.0 * p.mu * t).cos() + t * (PI / c).sqrt() * imw)
}

/// Closed form of xi(t) (gamma = 0; identically zero at mu = 0).
pub fn xi_closed(t: f64, p: &GaussLimitParams) -> Result<f64> {
    require_gamma_zero(p, "xi_closed")?;
    let c = 2.0 + p.gb;
    let imw = damped_im(p.mu * c.sqrt(), t / c.sqrt(), p.mu * t);
    Ok(-p.mu * (PI * c).sqrt() * imw)
}

// ---------------------------------------------------------------------------
// Quadrature evaluators (any gamma, any delta).
// ---------------------------------------------------------------------------

/// eta(t) by quadrature: Eq.-of-motion integrand with mu -> mu + gamma m when
/// gamma != 0; the anisotropy enters only through the m weight and cancels
/// entirely at gamma = 0 (where the radial path is used).
pub fn eta_quadrature(t: f64, p: &GaussLimitParams, q: &QuadratureSpec) -> Result<f64> {
    if p.gamma == 0.0 {
        let mu2 = p.mu * p.mu;
        radial_expectation(
            |r2| {
                let s = mu2 + r2;
                2.0 * r2 * (t * s.sqrt()).sin().powi(2) / s
            },
            p,
            q,
            "eta quadrature",
        )
    } else {
        let (gb, gbd, mu, gamma) = (p.gb, p.gbd, p.mu, p.gamma);
        expectation(
            move |r2, m| {
                let pm = mu + gamma * m;
                let s = pm * pm + r2;
                2.0 * r2 * (t * s.sqrt()).sin().powi(2) / s * (-gb * r2 - gbd * m * m).exp()
            },
            p,
            q,
        )
    }
}

/// zeta(t) by quadrature.
pub fn zeta_quadrature(t: f64, p: &GaussLimitParams, q: &QuadratureSpec) -> Result<f64> {
    if p.gamma == 0.0 {
        let mu2 = p.mu * p.mu;
        radial_expectation(
            |r2| (2.0 * t * (mu2 + r2).sqrt()).cos(),
            p,
            q,
            "zeta quadrature",
        )
    } else {
        let (gb, gbd, mu, gamma) = (p.gb, p.gbd, p.mu, p.gamma);
        expectation(
            move |r2, m| {
                let pm = mu + gamma * m;
                (2.0 * t * (pm * pm + r2).sqrt()).cos() * (-gb * r2 - gbd * m * m).exp()
            },
            p,
            q,
        )
    }
}

/// xi(t) by quadrature; the field prefactor also becomes mu + gamma m.
pub fn xi_quadrature(t: f64, p: &GaussLimitParams, q: &QuadratureSpec) -> Result<f64> {
    if p.gamma == 0.0 {
        let (mu, mu2) = (p.mu, p.mu * p.mu);
        radial_expectation(
            |r2| {
                let s = (mu2 + r2).sqrt();
                mu * (2.0 * t * s).sin() / s
            },
            p,
            q,
            "xi quadrature",
        )
    } else {
        let (gb, gbd, mu, gamma) = (p.gb, p.gbd, p.mu, p.gamma);
        expectation(
            move |r2, m| {
                let pm = mu + gamma * m;
                let s = (pm * pm + r2).sqrt();
                pm * (2.0 * t * s).sin() / s * (-gb * r2 - gbd * m * m).exp()
            },
            p,
            q,
        )
    }
}

// ---------------------------------------------------------------------------
// Bloch vector assembly and asymptotics.
// ---------------------------------------------------------------------------

fn response_functions(t: f64, p: &GaussLimitParams, q: &QuadratureSpec) -> Result<(f64, f64, f64)> {
    if p.gamma == 0.0 {
        let eta = if p.mu > 0.0 {
            eta_closed(t, p)?
        } else {
            eta_quadrature(t, p, q)?
        };
        Ok((eta, zeta_closed(t, p)?, xi_closed(t, p)?))
    } else {
        Ok((
            eta_quadrature(t, p, q)?,
            zeta_quadrature(t, p, q)?,
            xi_quadrature(t, p, q)?,
        ))
    }
}

fn assemble_bloch(b0: &BlochVector, eta: f64, zeta: f64, xi: f64) -> BlochVector {
    let coherence = zeta + 0.5 * eta;
    BlochVector {
        l1: b0.l1 * coherence + b0.l2 * xi,
        l2: b0.l2 * coherence - b0.l1 * xi,
        l3: b0.l3 * (1.0 - eta),
    }
}

/// Bloch vector at time t (units of 1/alpha) in the N -> infinity limit.
pub fn bloch_infinite(
    t: f64,
    p: &GaussLimitParams,
    b0: &BlochVector,
    q: &QuadratureSpec,
) -> Result<BlochVector> {
    let (eta, zeta, xi) = response_functions(t, p, q)?;
    Ok(assemble_bloch(b0, eta, zeta, xi))
}

/// Infinite-N trajectory; also returns eta(t) samples for the optional CSV
/// column.
pub fn trajectory_infinite(
    p: &GaussLimitParams,
    b0: &BlochVector,
    times: &[f64],
    q: &QuadratureSpec,
) -> Result<(Trajectory, Vec<f64>)> {
    check_time_grid(times)?;
    let b0 = BlochVector::new(b0.l1, b0.l2, b0.l3)?;
    let samples: Vec<(BlochVector, f64)> = times
        .par_iter()
        .map(|&t| {
            let (eta, zeta, xi) = response_functions(t, p, q)?;
            Ok((assemble_bloch(&b0, eta, zeta, xi), eta))
        })
        .collect::<Result<_>>()?;
    let (bloch, etas): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
    Ok((Trajectory::from_samples(times.to_vec(), bloch), etas))
}

/// eta_infinity = x e^x Gamma(0, x) at x = mu^2 (g beta + 2); zero at mu = 0.
pub fn eta_asymptote(p: &GaussLimitParams) -> Result<f64> {
    require_gamma_zero(p, "eta_asymptote")?;
    if p.mu == 0.0 {
        return Ok(0.0);
    }
    let x = p.mu * p.mu * (p.gb + 2.0);
    Ok(x * exp_e1(x)?)
}

/// lim_{t->inf} eta(t) for any gamma:
/// 1 - (1/sqrt pi) (2+gb) sqrt(2+gbd) int (mu+gamma m)^2 e^{x - (2+gbd) m^2}
/// Gamma(0, x) dm with x = (mu + gamma m)^2 (2+gb), the integrand evaluated in
/// fused x e^x Gamma(0,x) form (finite as x -> 0).
///
/// The fused integrand behaves like -x ln x near m = -mu/gamma, which defeats
/// Gauss-Hermite's spectral convergence, so the m integral runs through the
/// adaptive Gauss-Kronrod kernel split at the kink.
pub fn eta_asymptote_gamma(p: &GaussLimitParams, q: &QuadratureSpec) -> Result<f64> {
    q.validate()?;
    let c = 2.0 + p.gb;
    let cm = 2.0 + p.gbd;
    let integrand = |m: f64| {
        let pm = p.mu + p.gamma * m;
        let x = c * pm * pm;
        let fused = if x == 0.0 {
            0.0
        } else {
            x * exp_e1(x).expect("x > 0")
        };
        Complex64::new(fused * (-cm * m * m).exp(), 0.0)
    };
    let reach = (42.0 / cm).sqrt();
    let mut cuts = vec![-reach, reach];
    if p.gamma != 0.0 {
        let kink = -p.mu / p.gamma;
        if kink.abs() < reach {
            cuts.insert(1, kink);
        }
    }
    let mut integral = 0.0;
    for pair in cuts.windows(2) {
        integral += crate::numerics::integrate_complex(&integrand, pair[0], pair[1], q.abs_tol, 48)?
            .re;
    }
    Ok(1.0 - integral * (cm / PI).sqrt())
}

/// lambda(inf) = lambda_0 - eta_inf W lambda(0) with lambda_0 =
/// (lambda1(0)/2, lambda2(0)/2, 0) and W = diag(1/2, 1/2, -1).
pub fn asymptotic_bloch(p: &GaussLimitParams, b0: &BlochVector) -> Result<BlochVector> {
    require_gamma_zero(p, "asymptotic_bloch")?;
    let eta_inf = eta_asymptote(p)?;
    Ok(BlochVector {
        l1: b0.l1 * (1.0 - eta_inf) / 2.0,
        l2: b0.l2 * (1.0 - eta_inf) / 2.0,
        l3: b0.l3 * eta_inf,
    })
}

// ---------------------------------------------------------------------------
// Short-time laws and decoherence scales.
// ---------------------------------------------------------------------------

/// Gaussian decay rate of lambda3: coefficient of -t^2.
pub fn longitudinal_rate(p: &GaussLimitParams) -> f64 {
    2.0 / (2.0 + p.gb)
}

/// Gaussian decay rate of the transverse coherence: coefficient of -t^2
/// (the gamma^2/2 term is the Ising-channel contribution, zero at gamma = 0;
/// the gamma != 0 form holds on the Delta = 0 path).
pub fn transverse_rate(p: &GaussLimitParams) -> f64 {
    1.0 / (2.0 + p.gb) + p.gamma * p.gamma / 2.0
}

/// Short-time laws: lambda3 decays at twice the transverse rate, the
/// coherence precesses at 2 mu under its Gaussian envelope.
pub fn short_time(t: f64, p: &GaussLimitParams, b0: &BlochVector) -> BlochVector {
    let q3 = (-longitudinal_rate(p) * t * t).exp();
    let qc = (-transverse_rate(p) * t * t).exp();
    let (s, c) = (2.0 * p.mu * t).sin_cos();
    BlochVector {
        l1: qc * (b0.l1 * c + b0.l2 * s),
        l2: qc * (b0.l2 * c - b0.l1 * s),
        l3: q3 * b0.l3,
    }
}

/// Decoherence time constant, in units of 1/alpha:
/// sqrt(2 + g beta) at gamma = 0, sqrt((4 + 2 g beta)/(2 + gamma^2 (2 + g beta)))
/// otherwise.
pub fn decoherence_time(p: &GaussLimitParams) -> f64 {
    let c = 2.0 + p.gb;
    if p.gamma == 0.0 {
        c.sqrt()
    } else {
        ((4.0 + 2.0 * p.gb) / (2.0 + p.gamma * p.gamma * c)).sqrt()
    }
}

/// Ising-limit coherence envelope exp(-gamma^2 t^2 / (2 + g beta delta)),
/// intended for mu = alpha = 0, Delta >> 1.
pub fn ising_coherence(t: f64, p: &GaussLimitParams) -> f64 {
    (-p.gamma * p.gamma * t * t / (2.0 + p.gbd)).exp()
}
