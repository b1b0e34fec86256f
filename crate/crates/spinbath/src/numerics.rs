//! Shared numerical machinery: deterministic reductions, guarded trig kernels,
//! adaptive Gauss-Kronrod integration, symmetric eigensolvers and
//! Gauss-Hermite / Gauss-Laguerre rules.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Pairwise summation over a slice. Order-deterministic regardless of thread
/// count; rounding error grows like log(n) instead of n.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise summation of `f(0) + f(1) + ... + f(n-1)` without materializing
/// the terms.
pub fn pairwise_sum_fn<F: Fn(usize) -> f64 + Copy>(n: usize, f: F) -> f64 {
    fn rec<F: Fn(usize) -> f64 + Copy>(lo: usize, hi: usize, f: F) -> f64 {
        if hi - lo <= 32 {
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            return s;
        }
        let mid = lo + (hi - lo) / 2;
        rec(lo, mid, f) + rec(mid, hi, f)
    }
    if n == 0 {
        0.0
    } else {
        rec(0, n, f)
    }
}

/// log(sum(exp(x_i))) with the max factored out; pairwise inner sum.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mx = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + pairwise_sum_fn(xs.len(), |i| (xs[i] - mx).exp()).ln()
}

/// sin(x)/x with a 3-term Taylor guard below |x| = 1e-6 (removable
/// singularities in the spectral formulas reach x = 0 exactly).
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod (15-7) for complex integrands on a finite interval.
// ---------------------------------------------------------------------------

const GK_NODES: [f64; 8] = [
    0.000000000000000,
    0.207784955007898,
    0.405845151377397,
    0.586087235467691,
    0.741531185599394,
    0.864864423359769,
    0.949107912342759,
    0.991455371120813,
];
const GK_WEIGHTS: [f64; 8] = [
    0.209482141084728,
    0.204432940075298,
    0.190350578064785,
    0.169004726639267,
    0.140653259715525,
    0.104790010322250,
    0.063092092629979,
    0.022935322010529,
];
const G7_WEIGHTS: [f64; 4] = [
    0.417959183673469,
    0.381830050505119,
    0.279705391489277,
    0.129484966168870,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = GK_WEIGHTS[0] * fc;
    let mut gauss = G7_WEIGHTS[0] * fc;
    for i in 1..8 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kron += GK_WEIGHTS[i] * s;
        if i % 2 == 0 {
            gauss += G7_WEIGHTS[i / 2] * s;
        }
    }
    kron *= h;
    gauss *= h;
    (kron, (kron - gauss).norm())
}

/// Adaptive bisection driven by the Kronrod-vs-Gauss error estimate.
/// Fails with a tolerance error when the depth cap is reached.
pub fn integrate_complex<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_depth: u32,
) -> Result<Complex64> {
    fn rec<F: Fn(f64) -> Complex64>(
        f: &F,
        a: f64,
        b: f64,
        tol: f64,
        depth: u32,
        whole: Complex64,
        err: f64,
    ) -> Result<Complex64> {
        if err <= tol || err <= 1e-16 * whole.norm() {
            return Ok(whole);
        }
        if depth == 0 {
            return Err(Error::ToleranceFailure {
                context: "adaptive Gauss-Kronrod",
                prev: whole.norm(),
                last: err,
            });
        }
        let c = 0.5 * (a + b);
        let (left, el) = gk15(f, a, c);
        let (right, er) = gk15(f, c, b);
        Ok(rec(f, a, c, 0.5 * tol, depth - 1, left, el)?
            + rec(f, c, b, 0.5 * tol, depth - 1, right, er)?)
    }
    let (whole, err) = gk15(f, a, b);
    rec(f, a, b, abs_tol, max_depth, whole, err)
}

// ---------------------------------------------------------------------------
// Symmetric eigensolvers (Householder tridiagonalization + implicit-shift QL).
// ---------------------------------------------------------------------------

/// Implicit-shift QL on a symmetric tridiagonal matrix.
/// `d` holds the diagonal, `e[i]` the off-diagonal coupling i <-> i+1
/// (`e[n-1]` is workspace). When `z` is given its columns accumulate the
/// eigenvectors (it must start as the tridiagonalizing transform, or the
/// identity for a plain tridiagonal matrix).
fn tql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Array2<f64>>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::EigenFailure(iter));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zz) = z.as_deref_mut() {
                    for k in 0..n {
                        f = zz[(k, i + 1)];
                        zz[(k, i + 1)] = s * zz[(k, i)] + c * f;
                        zz[(k, i)] = c * zz[(k, i)] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric tridiagonal matrix, ascending.
pub fn tridiag_eigenvalues(diag: &[f64], offdiag: &[f64]) -> Result<Vec<f64>> {
    let mut d = diag.to_vec();
    let mut e = vec![0.0; d.len()];
    e[..offdiag.len()].copy_from_slice(offdiag);
    tql(&mut d, &mut e, None)?;
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(d)
}

/// Householder reduction of a real symmetric matrix to tridiagonal form,
/// accumulating the orthogonal transform in `a` (tred2).
fn tred2(a: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    a[(j, i)] = a[(i, j)] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f_acc += e[j] * a[(i, j)];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[(j, k)] -= f * e[k] + g * a[(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += a[(i, k)] * a[(k, j)];
                }
                for k in 0..i {
                    a[(k, j)] -= g * a[(k, i)];
                }
            }
        }
        d[i] = a[(i, i)];
        a[(i, i)] = 1.0;
        for j in 0..i {
            a[(j, i)] = 0.0;
            a[(i, j)] = 0.0;
        }
    }
}

/// Full eigendecomposition of a real symmetric matrix.
/// Returns eigenvalues ascending and the matching eigenvectors as columns.
pub fn sym_eigen(mat: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = mat.nrows();
    assert_eq!(n, mat.ncols(), "matrix must be square");
    let mut a = mat.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut a, &mut d, &mut e);
    // tred2 stores e with offset 1; tql expects e[i] = coupling i <-> i+1
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    tql(&mut d, &mut e, Some(&mut a))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| d[i]));
    let mut vecs = Array2::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, new)] = a[(k, old)];
        }
    }
    Ok((vals, vecs))
}

// ---------------------------------------------------------------------------
// Gauss-Hermite and Gauss-Laguerre rules (Golub-Welsch nodes via tridiagonal
// QL, weights via scaled Christoffel sums).
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum GaussKind {
    /// Weight e^{-x^2} on (-inf, inf).
    Hermite,
    /// Weight e^{-x} on [0, inf).
    Laguerre,
}

pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Jacobi-matrix recurrence coefficients: orthonormal polynomials satisfy
/// b_{k+1} p_{k+1} = (x - a_k) p_k - b_k p_{k-1}.
fn recurrence(kind: GaussKind, k: usize) -> (f64, f64) {
    match kind {
        GaussKind::Hermite => (0.0, (k as f64 / 2.0).sqrt()),
        GaussKind::Laguerre => ((2 * k + 1) as f64, k as f64),
    }
}

fn zeroth_moment(kind: GaussKind) -> f64 {
    match kind {
        GaussKind::Hermite => std::f64::consts::PI.sqrt(),
        GaussKind::Laguerre => 1.0,
    }
}

fn build_rule(kind: GaussKind, n: usize) -> Result<GaussRule> {
    assert!(n >= 1);
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n {
        let (a, _) = recurrence(kind, k);
        diag.push(a);
        if k + 1 < n {
            let (_, b) = recurrence(kind, k + 1);
            off.push(b);
        }
    }
    let nodes = tridiag_eigenvalues(&diag, &off)?;
    let mu0 = zeroth_moment(kind);
    // w_k = mu0 / sum_j p_j(x_k)^2 with power-of-two rescaling: the sum grows
    // like 1/weight(x) and overflows f64 at the outer nodes of large rules.
    let scale_trigger: f64 = (2.0f64).powi(470);
    let scale_factor: f64 = (2.0f64).powi(-470);
    let weights = nodes
        .iter()
        .map(|&x| {
            let mut pm = 0.0f64;
            let mut p = 1.0 / mu0.sqrt();
            let mut sum = p * p;
            let mut log_scale = 0.0f64; // accumulated ln of the applied rescale
            for k in 0..n - 1 {
                let (a_k, _) = recurrence(kind, k);
                let (_, b_k) = recurrence(kind, k);
                let (_, b_k1) = recurrence(kind, k + 1);
                let p_next = ((x - a_k) * p - b_k * pm) / b_k1;
                pm = p;
                p = p_next;
                sum += p * p;
                if p.abs() > scale_trigger {
                    pm *= scale_factor;
                    p *= scale_factor;
                    sum *= scale_factor * scale_factor;
                    log_scale += scale_factor.ln();
                }
            }
            // orthonormal Christoffel identity: w = 1 / sum_j p_j(x)^2;
            // true sum = sum * e^{-2 log_scale}
            (1.0 / sum) * (2.0 * log_scale).exp()
        })
        .collect();
    Ok(GaussRule {
        nodes,
        weights,
    })
}

static RULE_CACHE: OnceLock<Mutex<HashMap<(GaussKind, usize), Arc<GaussRule>>>> = OnceLock::new();

/// Cached rule lookup; rules are immutable once built.
pub fn gauss_rule(kind: GaussKind, n: usize) -> Result<Arc<GaussRule>> {
    let cache = RULE_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&(kind, n)) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(build_rule(kind, n)?);
    cache
        .lock()
        .unwrap()
        .entry((kind, n))
        .or_insert_with(|| rule.clone());
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.7).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert_abs_diff_eq!(pairwise_sum(&xs), naive, epsilon = 1e-10);
        assert_abs_diff_eq!(pairwise_sum_fn(xs.len(), |i| xs[i]), naive, epsilon = 1e-10);
    }

    #[test]
    fn logsumexp_handles_large_magnitudes() {
        let xs = [10000.0, 10000.0 + (2.0f64).ln()];
        assert_abs_diff_eq!(logsumexp(&xs), 10000.0 + (3.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn sinc_series_joins_smoothly() {
        for &x in &[1e-8f64, 9.9e-7, 1.1e-6, 0.5] {
            let exact = x.sin() / x;
            assert_abs_diff_eq!(sinc(x), exact, epsilon = 1e-15);
        }
        assert_eq!(sinc(0.0), 1.0);
    }

    #[test]
    fn gk15_integrates_exp() {
        let f = |x: f64| Complex64::new(x.exp(), (2.0 * x).cos());
        let got = integrate_complex(&f, 0.0, 1.0, 1e-13, 40).unwrap();
        assert_abs_diff_eq!(got.re, 1.0f64.exp() - 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(got.im, 2.0f64.sin() / 2.0, epsilon = 1e-13);
    }

    #[test]
    fn gk15_oscillatory() {
        let f = |x: f64| Complex64::new((40.0 * x).sin() * (-x).exp(), 0.0);
        let got = integrate_complex(&f, 0.0, 5.0, 1e-12, 40).unwrap();
        // int_0^5 sin(40x)e^{-x} dx = [40 - e^{-5}(40 cos 200 + sin 200)]/1601
        let exact = (40.0 - (-5.0f64).exp() * (40.0 * (200.0f64).cos() + (200.0f64).sin())) / 1601.0;
        assert_abs_diff_eq!(got.re, exact, epsilon = 1e-12);
    }

    #[test]
    fn tridiag_eigenvalues_2x2() {
        // [[1, 2], [2, 3]]: eigenvalues 2 -+ sqrt(5)
        let vals = tridiag_eigenvalues(&[1.0, 3.0], &[2.0]).unwrap();
        assert_abs_diff_eq!(vals[0], 2.0 - 5.0f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 2.0 + 5.0f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn sym_eigen_reconstructs() {
        let n = 12;
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let v = 1.0 / (1.0 + (i as f64 - j as f64).abs()) + if i == j { i as f64 } else { 0.0 };
                a[(i, j)] = v;
            }
        }
        let (vals, vecs) = sym_eigen(&a).unwrap();
        // A v_k = lambda_k v_k
        for k in 0..n {
            for i in 0..n {
                let mut av = 0.0;
                for j in 0..n {
                    av += a[(i, j)] * vecs[(j, k)];
                }
                assert_abs_diff_eq!(av, vals[k] * vecs[(i, k)], epsilon = 1e-10);
            }
        }
        // orthonormality
        for k in 0..n {
            for l in 0..n {
                let dot: f64 = (0..n).map(|i| vecs[(i, k)] * vecs[(i, l)]).sum();
                assert_abs_diff_eq!(dot, if k == l { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hermite_rule_moments() {
        let rule = gauss_rule(GaussKind::Hermite, 32).unwrap();
        let m0: f64 = rule.weights.iter().sum();
        let m2: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x * x)
            .sum();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert_abs_diff_eq!(m0, sqrt_pi, epsilon = 1e-13);
        assert_abs_diff_eq!(m2, sqrt_pi / 2.0, epsilon = 1e-13);
    }

    #[test]
    fn laguerre_rule_moments_high_order() {
        for &n in &[16usize, 128, 512] {
            let rule = gauss_rule(GaussKind::Laguerre, n).unwrap();
            let m0: f64 = pairwise_sum(&rule.weights);
            let m1: f64 = pairwise_sum_fn(n, |i| rule.weights[i] * rule.nodes[i]);
            let m3: f64 = pairwise_sum_fn(n, |i| rule.weights[i] * rule.nodes[i].powi(3));
            assert_abs_diff_eq!(m0, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m1, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m3, 6.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn laguerre_rule_gaussian_decay_integrand() {
        // int_0^inf e^{-u} e^{-u/2} du = 2/3, spectral convergence expected
        let rule = gauss_rule(GaussKind::Laguerre, 64).unwrap();
        let v: f64 = pairwise_sum_fn(64, |i| rule.weights[i] * (-0.5 * rule.nodes[i]).exp());
        assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-12);
    }
}
