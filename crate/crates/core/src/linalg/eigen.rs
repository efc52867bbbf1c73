use crate::rng::Stream;

use super::matrix::{dot, norm2, DenseMatrix};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 5000;
const START_SEED: u64 = 0x5E_ED0F_90E7;

fn start_vector(n: usize) -> Vec<f64> {
    let mut stream = Stream::new(START_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| stream.normal()).collect();
    let nrm = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nrm);
    v
}

fn apply(a: &DenseMatrix, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (j, &xj) in x.iter().enumerate() {
        for (o, aij) in out.iter_mut().zip(a.col(j)) {
            *o += aij * xj;
        }
    }
}

fn apply_t(a: &DenseMatrix, x: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = dot(a.col(j), x);
    }
}

/// Spectral norm by power iteration on `AᵀA` from a fixed start vector.
///
/// The returned value is `|A v|₂` for a unit vector `v`, so it never
/// exceeds the true norm. Iteration stops once the estimate changes by less
/// than `tol` relative, or after `max_iter` sweeps.
pub fn spectral_norm(a: &DenseMatrix, tol: f64, max_iter: usize) -> f64 {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return 0.0;
    }
    let mut v = start_vector(n);
    let mut av = vec![0.0; m];
    let mut atav = vec![0.0; n];
    let mut best: f64 = 0.0;
    let mut previous = 0.0;
    for _ in 0..max_iter.max(1) {
        apply(a, &v, &mut av);
        let sigma = norm2(&av);
        best = best.max(sigma);
        if sigma == 0.0 {
            break;
        }
        if (sigma - previous).abs() <= tol * sigma {
            break;
        }
        previous = sigma;
        apply_t(a, &av, &mut atav);
        let nrm = norm2(&atav);
        if nrm == 0.0 {
            break;
        }
        v.iter_mut().zip(&atav).for_each(|(vi, w)| *vi = w / nrm);
    }
    best
}

/// Dominant eigenpair of a symmetric positive semidefinite operator
/// `x ↦ shift·x + sign·A x`, stopping on the eigen-residual.
fn dominant_shifted(a: &DenseMatrix, shift: f64, sign: f64, tol: f64, max_iter: usize) -> f64 {
    let n = a.rows();
    let mut v = start_vector(n);
    let mut w = vec![0.0; n];
    let mut theta = 0.0;
    for _ in 0..max_iter.max(1) {
        apply(a, &v, &mut w);
        w.iter_mut()
            .zip(&v)
            .for_each(|(wi, vi)| *wi = shift * vi + sign * *wi);
        theta = dot(&v, &w);
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - theta * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let nrm = norm2(&w);
        if nrm == 0.0 || residual <= tol * theta.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / nrm);
    }
    theta
}

/// Smallest and largest eigenvalues of a symmetric matrix.
///
/// `λ_max` comes from power iteration on the positive semidefinite shift
/// `A + ‖A‖_∞ I`, and `λ_min` from power iteration on `λ_max I − A`. Both
/// iterations stop when the eigen-residual falls below `tol` relative to the
/// dominant eigenvalue of the shifted operator.
pub fn extreme_eigenvalues(a: &DenseMatrix, tol: f64) -> (f64, f64) {
    extreme_eigenvalues_with(a, tol, POWER_MAX_ITER)
}

pub fn extreme_eigenvalues_with(a: &DenseMatrix, tol: f64, max_iter: usize) -> (f64, f64) {
    assert!(a.is_square(), "extreme_eigenvalues needs a square matrix");
    if a.rows() == 0 {
        return (0.0, 0.0);
    }
    let bound = a.inf_norm();
    if bound == 0.0 {
        return (0.0, 0.0);
    }
    let lambda_max = dominant_shifted(a, bound, 1.0, tol, max_iter) - bound;
    let spread = dominant_shifted(a, lambda_max, -1.0, tol, max_iter);
    (lambda_max - spread, lambda_max)
}
