//! Bath sector enumeration: degeneracies, Boltzmann weights and the partition
//! function, all in natural-log space so N = 5000 stays in range.

use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BathSize, ModelParams};
use crate::numerics::logsumexp;

/// One (j, m) sector of the bath Hilbert space.
#[derive(Debug, Clone, Copy)]
pub struct SectorEntry {
    pub j: u32,
    pub m: i32,
    /// ln nu(N, j).
    pub log_nu: f64,
    /// Bath energy (g/N)[j(j+1) + (delta-1) m^2], constant term dropped.
    pub e_b: f64,
    /// Unnormalized log weight: log_nu - beta * e_b.
    pub log_w: f64,
}

/// All (N/2+1)^2 sectors, ordered j descending then m ascending, plus log Z_N.
#[derive(Debug, Clone)]
pub struct SectorTable {
    pub n: u32,
    pub entries: Vec<SectorEntry>,
    pub log_zn: f64,
}

// ln k! via a Kahan-compensated cumulative sum, cached process-wide. Only
// integer arguments ever occur, and Lanczos-grade ~1e-10 absolute error would
// break the 1e-12 degeneracy sum rule.
struct LnFactorials {
    vals: Vec<f64>,
    comp: f64,
}

static LN_FACTORIALS: Mutex<LnFactorials> = Mutex::new(LnFactorials {
    vals: Vec::new(),
    comp: 0.0,
});

fn ln_factorial(k: usize) -> f64 {
    let mut table = LN_FACTORIALS.lock().unwrap();
    if table.vals.is_empty() {
        table.vals.push(0.0); // ln 0! = 0
    }
    while table.vals.len() <= k {
        let i = table.vals.len() as f64;
        let last = *table.vals.last().unwrap();
        let y = i.ln() - table.comp;
        let t = last + y;
        table.comp = (t - last) - y;
        table.vals.push(t);
    }
    table.vals[k]
}

/// ln nu(N, j) where nu(N, j) = (2j+1)/(N/2+j+1) * N! / ((N/2-j)! (N/2+j)!).
pub fn log_degeneracy(n: u32, j: u32) -> Result<f64> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::Unsupported(format!("bath size {n} must be even")));
    }
    let half = n / 2;
    if j > half {
        return Err(Error::Domain(format!("j = {j} outside 0..{half}")));
    }
    Ok(((2 * j + 1) as f64).ln() - ((half + j + 1) as f64).ln() + ln_factorial(n as usize)
        - ln_factorial((half - j) as usize)
        - ln_factorial((half + j) as usize))
}

/// Bath energy of sector (j, m) in internal units; g and n from the model.
pub fn bath_energy(n: u32, g: f64, delta: f64, j: i64, m: i64) -> f64 {
    (g / n as f64) * ((j * (j + 1)) as f64 + (delta - 1.0) * (m * m) as f64)
}

/// Builds the full thermal sector table for a finite bath.
pub fn build_sector_table(p: &ModelParams) -> Result<SectorTable> {
    let n = match p.bath {
        BathSize::Finite(n) => n,
        BathSize::Infinite => {
            return Err(Error::Unsupported(
                "sector table requires a finite bath".into(),
            ))
        }
    };
    let half = n / 2;
    // warm the factorial cache once so the parallel rows only read
    ln_factorial((n + 1) as usize);
    let rows: Vec<Vec<SectorEntry>> = (0..=half)
        .into_par_iter()
        .map(|jr| {
            let j = half - jr; // j descending
            let log_nu = log_degeneracy(n, j).expect("j in range");
            (-(j as i32)..=j as i32)
                .map(|m| {
                    let e_b = bath_energy(n, p.g, p.delta, j as i64, m as i64);
                    SectorEntry {
                        j,
                        m,
                        log_nu,
                        e_b,
                        log_w: log_nu - p.beta * e_b,
                    }
                })
                .collect()
        })
        .collect();
    let entries: Vec<SectorEntry> = rows.into_iter().flatten().collect();
    let log_ws: Vec<f64> = entries.iter().map(|s| s.log_w).collect();
    let log_zn = logsumexp(&log_ws);
    Ok(SectorTable { n, entries, log_zn })
}

impl SectorTable {
    /// Normalized thermal weight nu e^{-beta E}/Z_N of one entry.
    pub fn weight(&self, entry: &SectorEntry) -> f64 {
        (entry.log_w - self.log_zn).exp()
    }

    /// CSV debug rows, schema `j,m,log_nu,e_bath`.
    pub fn csv_rows(&self) -> impl Iterator<Item = String> + '_ {
        std::iter::once("j,m,log_nu,e_bath".to_string()).chain(
            self.entries
                .iter()
                .map(|s| format!("{},{},{:.16e},{:.16e}", s.j, s.m, s.log_nu, s.e_b)),
        )
    }
}

/// log Z_N for the isotropic model (delta = 1), where the m-sum collapses to
/// a (2j+1) multiplicity.
pub fn log_zn_isotropic(p: &ModelParams) -> Result<f64> {
    let n = p
        .n()
        .ok_or_else(|| Error::Unsupported("finite bath required".into()))?;
    let half = n / 2;
    let terms: Vec<f64> = (0..=half)
        .rev()
        .map(|j| {
            log_degeneracy(n, j).expect("in range") + ((2 * j + 1) as f64).ln()
                - p.beta * p.g / n as f64 * (j * (j + 1)) as f64
        })
        .collect();
    Ok(logsumexp(&terms))
}

/// ln sum_j nu(N,j)(2j+1), which must equal N ln 2 exactly.
pub fn log_dimension_sum(n: u32) -> Result<f64> {
    let half = n / 2;
    let terms: Vec<f64> = (0..=half)
        .rev()
        .map(|j| log_degeneracy(n, j).map(|l| l + ((2 * j + 1) as f64).ln()))
        .collect::<Result<_>>()?;
    Ok(logsumexp(&terms))
}

/// 2^{-N} tr (J_z / sqrt N)^2 under the tracial (infinite-temperature) state;
/// equals 1/4 for every N.
pub fn tracial_moment_jz2(n: u32) -> Result<f64> {
    let half = n / 2;
    let terms: Vec<f64> = (1..=half)
        .rev()
        .map(|j| {
            // sum_m m^2 = j(j+1)(2j+1)/3
            let jj = j as f64;
            log_degeneracy(n, j).map(|l| l + (jj * (jj + 1.0) * (2.0 * jj + 1.0) / 3.0).ln())
        })
        .collect::<Result<_>>()?;
    Ok((logsumexp(&terms) - n as f64 * std::f64::consts::LN_2 - (n as f64).ln()).exp())
}

/// 2^{-N} tr (J_+ J_- / N) under the tracial state; equals 1/2 for every N.
pub fn tracial_moment_jpm(n: u32) -> Result<f64> {
    let half = n / 2;
    let terms: Vec<f64> = (1..=half)
        .rev()
        .map(|j| {
            // sum_m (j+m)(j-m+1) = (2/3) j(j+1)(2j+1)
            let jj = j as f64;
            log_degeneracy(n, j)
                .map(|l| l + (2.0 / 3.0 * jj * (jj + 1.0) * (2.0 * jj + 1.0)).ln())
        })
        .collect::<Result<_>>()?;
    Ok((logsumexp(&terms) - n as f64 * std::f64::consts::LN_2 - (n as f64).ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BathSize, ModelParams};
    use crate::numerics::pairwise_sum_fn;
    use approx::assert_abs_diff_eq;

    fn params(n: u32, g: f64, delta: f64, beta: f64) -> ModelParams {
        ModelParams::new(0.0, 0.0, 1.0, g, delta, beta, BathSize::Finite(n)).unwrap()
    }

    #[test]
    fn small_degeneracies() {
        assert_abs_diff_eq!(log_degeneracy(4, 1).unwrap(), 3.0f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(log_degeneracy(4, 2).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(log_degeneracy(4, 0).unwrap(), 2.0f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn degeneracy_rejects_bad_args() {
        assert!(log_degeneracy(5, 1).is_err());
        assert!(log_degeneracy(4, 3).is_err());
    }

    #[test]
    fn dimension_sum_rule() {
        for &n in &[2u32, 4, 10, 50, 200] {
            let got = log_dimension_sum(n).unwrap();
            let want = n as f64 * std::f64::consts::LN_2;
            assert!(
                (got - want).abs() <= 1e-12 * want,
                "N = {n}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn infinite_temperature_partition_function() {
        let t = build_sector_table(&params(4, 1.0, 0.5, 0.0)).unwrap();
        assert_abs_diff_eq!(t.log_zn, 4.0 * std::f64::consts::LN_2, epsilon = 1e-13);
        assert_eq!(t.entries.len(), 9); // (N/2+1)^2
    }

    #[test]
    fn table_one_values() {
        for (n, want) in [(10u32, 0.203026), (100, 0.203997)] {
            let t = build_sector_table(&params(n, 2.0, 5.0, 1.0)).unwrap();
            let val = (t.log_zn - n as f64 * std::f64::consts::LN_2).exp();
            assert_abs_diff_eq!(val, want, epsilon = 1e-6);
        }
    }

    #[test]
    fn log_zn_regression_n10() {
        // frozen from an independent implementation of the same sums
        let t = build_sector_table(&params(10, 2.0, 5.0, 1.0)).unwrap();
        assert_abs_diff_eq!(t.log_zn, 5.33705175786220209, epsilon = 1e-12);
    }

    #[test]
    fn isotropic_collapse_matches_full_table() {
        for beta in [0.0, 0.7, 3.0] {
            let p = params(12, 1.5, 1.0, beta);
            let full = build_sector_table(&p).unwrap().log_zn;
            let iso = log_zn_isotropic(&p).unwrap();
            assert!((full - iso).abs() <= 1e-12 * full.abs().max(1.0));
        }
    }

    #[test]
    fn entry_order_is_j_descending_m_ascending() {
        let t = build_sector_table(&params(4, 1.0, 0.0, 0.3)).unwrap();
        let jm: Vec<(u32, i32)> = t.entries.iter().map(|s| (s.j, s.m)).collect();
        assert_eq!(
            jm,
            vec![
                (2, -2),
                (2, -1),
                (2, 0),
                (2, 1),
                (2, 2),
                (1, -1),
                (1, 0),
                (1, 1),
                (0, 0)
            ]
        );
    }

    #[test]
    fn tracial_moments() {
        assert_abs_diff_eq!(tracial_moment_jz2(4).unwrap(), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(tracial_moment_jz2(100).unwrap(), 0.25, epsilon = 1e-13);
        assert_abs_diff_eq!(tracial_moment_jpm(4).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(tracial_moment_jpm(100).unwrap(), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn normalized_weights_sum_to_one() {
        let t = build_sector_table(&params(20, -3.0, 2.0, 1.3)).unwrap();
        let total = pairwise_sum_fn(t.entries.len(), |i| t.weight(&t.entries[i]));
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn partition_function_monotone_toward_limit() {
        // Table-I parameter set: 2^{-N} Z_N increases toward Zbar
        let mut prev = 0.0;
        for &n in &[10u32, 100, 1000] {
            let t = build_sector_table(&params(n, 2.0, 5.0, 1.0)).unwrap();
            let val = (t.log_zn - n as f64 * std::f64::consts::LN_2).exp();
            assert!(val > prev);
            prev = val;
        }
        assert!(prev < 0.204124145231931508);
    }
}
