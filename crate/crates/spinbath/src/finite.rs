//! Exact finite-N Bloch trajectories from the diagonalized evolution
//! operator: per-sector spectral scalars and thermally weighted sector sums.
//!
//! The longitudinal component is assembled as
//!
//! lambda3(t) = sum (W - W') S  +  lambda3(0) [1 - sum (W + W') S],
//!
//! with S = (alpha^2 J+J- / N M1) sin^2(t sqrt M1) per sector, W the normalized
//! thermal weight of (j, m) and W' the weight built from the (j, m-1) bath
//! energy; the pair (W -+ W') is the sinh/cosh split of the printed trace with
//! the exponent shift applied analytically in log space. The sign of the sinh
//! term here is opposite to the printed expression: re-deriving rho22 - rho11
//! through the ladder identities J-F1 = -F2 J-, J-M1 = M2 J- fixes it, and the
//! dense-diagonalization oracle confirms the corrected sign to machine
//! precision (see oracle tests).

use rayon::prelude::*;

use crate::bath::{bath_energy, SectorTable};
use crate::error::{Error, Result};
use crate::model::{purity, BlochVector, ModelParams};
use crate::numerics::{pairwise_sum, sinc};

/// Spectral scalars of one (j, m) sector.
#[derive(Debug, Clone, Copy)]
pub struct SectorSpectrum {
    /// Eigenvalue of F1 = mu + (gamma/sqrt N + g(1-Delta)/N)(J_z - 1/2).
    pub f1: f64,
    /// Eigenvalue of F2 = -mu - (gamma/sqrt N + g(1-Delta)/N)(J_z + 1/2).
    pub f2: f64,
    /// Eigenvalue of M1 = F1^2 + (alpha^2/N) J+J-; always >= 0.
    pub m1: f64,
    /// Eigenvalue of M2 = F2^2 + (alpha^2/N) J-J+; always >= 0.
    pub m2: f64,
    /// (j+m)(j-m+1), the J+J- eigenvalue.
    pub jpjm: f64,
    /// (j-m)(j+m+1), the J-J+ eigenvalue.
    pub jmjp: f64,
    /// Eigenvalue of Omega = 2g(Delta-1) J_z / N.
    pub omega: f64,
}

/// Internal transverse coupling is 1 after the ingestion rescale.
const ALPHA: f64 = 1.0;

pub fn sector_spectrum(p: &ModelParams, j: i64, m: i64) -> SectorSpectrum {
    let n = p.n().expect("finite bath") as f64;
    debug_assert!(m.abs() <= j);
    let c = p.gamma / n.sqrt() + p.g * (1.0 - p.delta) / n;
    let f1 = p.mu + c * (m as f64 - 0.5);
    let f2 = -p.mu - c * (m as f64 + 0.5);
    let jpjm = ((j + m) * (j - m + 1)) as f64;
    let jmjp = ((j - m) * (j + m + 1)) as f64;
    SectorSpectrum {
        f1,
        f2,
        m1: f1 * f1 + ALPHA * ALPHA / n * jpjm,
        m2: f2 * f2 + ALPHA * ALPHA / n * jmjp,
        jpjm,
        jmjp,
        omega: 2.0 * p.g / n * (p.delta - 1.0) * m as f64,
    }
}

/// Longitudinal Bloch component at time t (units of 1/alpha).
pub fn lambda3_finite(p: &ModelParams, table: &SectorTable, l3_0: f64, t: f64) -> f64 {
    let n = table.n as f64;
    let mut sym = Vec::with_capacity(table.entries.len());
    let mut asym = Vec::with_capacity(table.entries.len());
    for s in &table.entries {
        let sp = sector_spectrum(p, s.j as i64, s.m as i64);
        if sp.jpjm == 0.0 {
            continue; // m = -j carries no flip-flop weight
        }
        let w = (s.log_w - table.log_zn).exp();
        let e_shift = bath_energy(table.n, p.g, p.delta, s.j as i64, s.m as i64 - 1);
        let w_shift = (s.log_nu - p.beta * e_shift - table.log_zn).exp();
        let x = t * sp.m1.sqrt();
        let snc = sinc(x);
        let q = ALPHA * ALPHA * sp.jpjm / n * t * t * snc * snc;
        sym.push((w + w_shift) * q);
        asym.push((w - w_shift) * q);
    }
    pairwise_sum(&asym) + l3_0 * (1.0 - pairwise_sum(&sym))
}

/// Transverse Bloch components at time t.
pub fn lambda12_finite(
    p: &ModelParams,
    table: &SectorTable,
    l1_0: f64,
    l2_0: f64,
    t: f64,
) -> (f64, f64) {
    let mut t1 = Vec::with_capacity(table.entries.len());
    let mut t2 = Vec::with_capacity(table.entries.len());
    for s in &table.entries {
        let sp = sector_spectrum(p, s.j as i64, s.m as i64);
        let w = (s.log_w - table.log_zn).exp();
        let x1 = t * sp.m1.sqrt();
        let x2 = t * sp.m2.sqrt();
        let (snc1, snc2) = (sinc(x1), sinc(x2));
        let a = w * (x1.cos() * x2.cos() + sp.f1 * sp.f2 * t * t * snc1 * snc2);
        let b = w * t * (sp.f1 * snc1 * x2.cos() - sp.f2 * snc2 * x1.cos());
        let (sin_o, cos_o) = (sp.omega * t).sin_cos();
        let u = l1_0 * cos_o + l2_0 * sin_o;
        let v = l1_0 * sin_o - l2_0 * cos_o;
        t1.push(u * a - v * b);
        t2.push(-(v * a + u * b));
    }
    (pairwise_sum(&t1), pairwise_sum(&t2))
}

/// Time grid plus Bloch vector and purity samples.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub bloch: Vec<BlochVector>,
    pub purity: Vec<f64>,
}

impl Trajectory {
    pub(crate) fn from_samples(times: Vec<f64>, bloch: Vec<BlochVector>) -> Self {
        let purity = bloch.iter().map(purity).collect();
        Self {
            times,
            bloch,
            purity,
        }
    }
}

pub(crate) fn check_time_grid(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Unsupported(
            "time grid must be sorted and nonnegative".into(),
        ));
    }
    Ok(())
}

/// Full finite-N trajectory over a caller-supplied sorted time grid.
pub fn trajectory_finite(p: &ModelParams, b0: &BlochVector, times: &[f64]) -> Result<Trajectory> {
    check_time_grid(times)?;
    let b0 = BlochVector::new(b0.l1, b0.l2, b0.l3)?;
    let table = crate::bath::build_sector_table(p)?;
    let bloch: Vec<BlochVector> = times
        .par_iter()
        .map(|&t| {
            let (l1, l2) = lambda12_finite(p, &table, b0.l1, b0.l2, t);
            let l3 = lambda3_finite(p, &table, b0.l3, t);
            BlochVector { l1, l2, l3 }
        })
        .collect();
    Ok(Trajectory::from_samples(times.to_vec(), bloch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::build_sector_table;
    use crate::model::BathSize;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(n: u32, mu: f64, gamma: f64, g: f64, delta: f64, beta: f64) -> ModelParams {
        ModelParams::new(mu, gamma, 1.0, g, delta, beta, BathSize::Finite(n)).unwrap()
    }

    #[test]
    fn singlet_sector_is_trivial() {
        let p = params(8, 0.7, 1.2, -2.0, 0.3, 0.9);
        let sp = sector_spectrum(&p, 0, 0);
        assert_eq!(sp.jpjm, 0.0);
        assert_eq!(sp.jmjp, 0.0);
        assert_abs_diff_eq!(sp.m1, sp.f1 * sp.f1, epsilon = 1e-15);
        assert_abs_diff_eq!(sp.m2, sp.f2 * sp.f2, epsilon = 1e-15);
    }

    #[test]
    fn f1_vanishes_in_symmetric_point() {
        // gamma = 0, delta = 1, mu = 0: every term of F1 is zero
        let p = params(6, 0.0, 0.0, 3.0, 1.0, 0.4);
        for j in 0..=3i64 {
            for m in -j..=j {
                assert_eq!(sector_spectrum(&p, j, m).f1, 0.0);
            }
        }
    }

    #[test]
    fn ladder_identities() {
        let p = params(10, 0.37, -1.1, 2.2, 0.8, 0.0);
        let a = sector_spectrum(&p, 3, 1);
        let b = sector_spectrum(&p, 3, 0);
        assert_abs_diff_eq!(a.f1, -b.f2, epsilon = 1e-15);
        assert_abs_diff_eq!(a.m1, b.m2, epsilon = 1e-15);
    }

    #[test]
    fn initial_time_reproduces_input() {
        let p = params(12, 1.0, 0.5, 1.0, 0.5, 0.8);
        let table = build_sector_table(&p).unwrap();
        assert_abs_diff_eq!(lambda3_finite(&p, &table, 0.5, 0.0), 0.5, epsilon = 1e-12);
        let (l1, l2) = lambda12_finite(&p, &table, 0.375, -0.2, 0.0);
        assert_abs_diff_eq!(l1, 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(l2, -0.2, epsilon = 1e-12);
    }

    #[test]
    fn zero_temperature_antiferromagnet_keeps_coherence() {
        // beta -> inf proxy: only the j = 0 singlet survives, the spin precesses
        // freely and lambda3 stays put
        let p = params(8, 0.6, 0.0, 1.0, 0.5, 1e6);
        let table = build_sector_table(&p).unwrap();
        for &t in &[0.5, 3.0, 17.0] {
            assert_abs_diff_eq!(lambda3_finite(&p, &table, 0.5, t), 0.5, epsilon = 1e-9);
            let (l1, l2) = lambda12_finite(&p, &table, 0.375, 0.375, t);
            // free precession at frequency 2 mu
            let (s, c) = (2.0 * 0.6 * t).sin_cos();
            assert_abs_diff_eq!(l1, 0.375 * c + 0.375 * s, epsilon = 1e-9);
            assert_abs_diff_eq!(l2, 0.375 * c - 0.375 * s, epsilon = 1e-9);
        }
    }

    #[test]
    fn regression_fig3_params_n10() {
        // frozen from the brute-force-validated reference implementation
        let p = params(10, 0.4, 0.0, 1.0, 0.5, 5.0);
        let table = build_sector_table(&p).unwrap();
        let (l1, l2) = lambda12_finite(&p, &table, 0.375, 0.375, 2.0);
        let l3 = lambda3_finite(&p, &table, 0.5, 2.0);
        assert_abs_diff_eq!(l1, 1.66283349975179073e-1, epsilon = 1e-13);
        assert_abs_diff_eq!(l2, -3.05627109075174597e-1, epsilon = 1e-13);
        assert_abs_diff_eq!(l3, 2.15127325773000616e-1, epsilon = 1e-13);
    }

    #[test]
    fn regression_mixed_params_n8() {
        let p = params(8, 0.7, 1.3, -2.0, 1.5, 0.8);
        let table = build_sector_table(&p).unwrap();
        let (l1, l2) = lambda12_finite(&p, &table, 0.2, -0.4, 3.5);
        let l3 = lambda3_finite(&p, &table, 0.3, 3.5);
        assert_abs_diff_eq!(l1, -2.28925953846030039e-2, epsilon = 1e-13);
        assert_abs_diff_eq!(l2, -1.03367277999973431e-3, epsilon = 1e-13);
        assert_abs_diff_eq!(l3, 1.59460240559919891e-1, epsilon = 1e-13);
    }

    #[test]
    fn trajectory_single_point() {
        let p = params(4, 1.0, 0.0, 1.0, 0.0, 0.5);
        let b0 = BlochVector::new(0.375, 0.375, 0.5).unwrap();
        let tr = trajectory_finite(&p, &b0, &[0.0]).unwrap();
        assert_eq!(tr.times, vec![0.0]);
        assert_abs_diff_eq!(tr.bloch[0].l1, 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(tr.purity[0], purity(&b0), epsilon = 1e-12);
    }

    #[test]
    fn trajectory_rejects_unsorted_grid() {
        let p = params(4, 1.0, 0.0, 1.0, 0.0, 0.5);
        let b0 = BlochVector::new(0.0, 0.0, 0.5).unwrap();
        assert!(trajectory_finite(&p, &b0, &[1.0, 0.5]).is_err());
        assert!(trajectory_finite(&p, &b0, &[-1.0, 0.5]).is_err());
    }

    #[test]
    fn bloch_norm_never_grows() {
        let p = params(20, 1.0, 2.0, -5.0, 0.5, 1.0);
        let b0 = BlochVector::new(0.375, 0.375, 0.5).unwrap();
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.15).collect();
        let tr = trajectory_finite(&p, &b0, &times).unwrap();
        let n0 = b0.norm_sq();
        for b in &tr.bloch {
            assert!(b.norm_sq() <= n0 + 1e-9);
        }
        for &pu in &tr.purity {
            assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&pu));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ladder_identity_everywhere(
            mu in -2.0f64..2.0,
            gamma in -2.0f64..2.0,
            g in -5.0f64..5.0,
            delta in 0.0f64..2.0,
            j in 1i64..8,
            moff in 0i64..15,
        ) {
            let m = -j + 1 + moff % (2 * j);
            let p = params(16, mu, gamma, g, delta, 0.0);
            let a = sector_spectrum(&p, j, m);
            let b = sector_spectrum(&p, j, m - 1);
            prop_assert!((a.f1 + b.f2).abs() < 1e-12);
            prop_assert!((a.m1 - b.m2).abs() < 1e-12);
        }

        #[test]
        fn per_sector_unitarity(
            mu in -2.0f64..2.0,
            gamma in -2.0f64..2.0,
            g in -5.0f64..5.0,
            delta in 0.0f64..2.0,
            t in 0.0f64..20.0,
            j in 0i64..8,
            moff in 0i64..16,
        ) {
            // |u11|^2 + (alpha^2/N) J+J- |sin(t sqrt M1)/sqrt M1|^2 = 1
            let m = -j + moff % (2 * j + 1);
            let p = params(16, mu, gamma, g, delta, 0.0);
            let sp = sector_spectrum(&p, j, m);
            let x = t * sp.m1.sqrt();
            let snc = sinc(x);
            let u11_sq = x.cos() * x.cos() + sp.f1 * sp.f1 * t * t * snc * snc;
            let flip = sp.jpjm / 16.0 * t * t * snc * snc;
            prop_assert!((u11_sq + flip - 1.0).abs() < 1e-12);
        }

        #[test]
        fn quarter_turn_commutes_at_delta_one(
            l1 in -0.5f64..0.5,
            l2 in -0.5f64..0.5,
            t in 0.0f64..10.0,
        ) {
            // Omega = 0 at delta = 1: the transverse map commutes with
            // (l1, l2) -> (l2, -l1)
            let p = params(8, 0.8, 0.4, 1.5, 1.0, 0.6);
            let table = build_sector_table(&p).unwrap();
            let (m1, m2) = lambda12_finite(&p, &table, l1, l2, t);
            let (r1, r2) = lambda12_finite(&p, &table, l2, -l1, t);
            prop_assert!((r1 - m2).abs() < 1e-12);
            prop_assert!((r2 + m1).abs() < 1e-12);
        }
    }
}
