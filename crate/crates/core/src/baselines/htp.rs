use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::giss::{GissResult, Termination};
use crate::linalg::{
    norm_inf, restricted_least_squares, spectral_norm, DenseMatrix, DenseVector, IndexSet,
    POWER_MAX_ITER, POWER_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HtpConfig {
    /// Number of coefficients kept after each thresholding step.
    pub sparsity_s: usize,
    pub max_iters: usize,
    /// Gradient step, applied to `Σ / ‖Σ‖₂` when `‖Σ‖₂ > 1`.
    pub step_size: f64,
    /// Early exit once `|e − Σβ|_∞ ≤ tol`.
    pub tol: f64,
}

impl HtpConfig {
    pub fn new(sparsity_s: usize) -> Self {
        Self {
            sparsity_s,
            max_iters: 500,
            step_size: 1.0,
            tol: 1e-12,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.sparsity_s == 0 || self.sparsity_s > p {
            return Err(Error::InvalidConfig(format!(
                "sparsity must lie in [1, {p}], got {}",
                self.sparsity_s
            )));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidConfig("step size must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Indices of the `s` largest magnitudes of `u`, ignoring exact zeros.
/// Ties go to the lower index.
fn largest_s(u: &[f64], s: usize) -> IndexSet {
    let mut order: Vec<usize> = (0..u.len()).filter(|&j| u[j] != 0.0).collect();
    order.sort_by(|&a, &b| u[b].abs().total_cmp(&u[a].abs()).then(a.cmp(&b)));
    order.truncate(s);
    IndexSet::from_unsorted(order)
}

/// Gradient step used by [`htp_solve_column`]; depends only on `Σ`.
pub fn htp_step_size(sigma: &DenseMatrix, cfg: &HtpConfig) -> f64 {
    let norm = spectral_norm(sigma, POWER_TOL, POWER_MAX_ITER);
    if norm > 1.0 {
        cfg.step_size / (norm * norm)
    } else {
        cfg.step_size
    }
}

/// Hard thresholding pursuit: gradient step, keep the `s` largest entries,
/// refit by least squares on that support; stop when the support repeats.
pub fn htp_solve_column(sigma: &DenseMatrix, e: &[f64], cfg: &HtpConfig) -> Result<GissResult> {
    htp_solve_column_with_step(sigma, e, cfg, htp_step_size(sigma, cfg))
}

/// As [`htp_solve_column`] with a precomputed step.
pub fn htp_solve_column_with_step(
    sigma: &DenseMatrix,
    e: &[f64],
    cfg: &HtpConfig,
    step: f64,
) -> Result<GissResult> {
    if !sigma.is_square() {
        return Err(Error::NotSquare {
            rows: sigma.rows(),
            cols: sigma.cols(),
        });
    }
    if e.len() != sigma.rows() {
        return Err(Error::DimensionMismatch {
            expected: (sigma.rows(), 1),
            got: (e.len(), 1),
        });
    }
    let p = sigma.cols();
    cfg.validate(p)?;

    let mut beta = DenseVector::zeros(p);
    let mut residual: Vec<f64> = e.to_vec();
    let mut support = IndexSet::empty();
    let mut regularized = false;
    let mut iterations = 0;
    let mut termination = Termination::MaxIters;
    if norm_inf(&residual) <= cfg.tol {
        termination = Termination::ResidualBelowLambda;
    }
    while termination == Termination::MaxIters && iterations < cfg.max_iters {
        let grad = sigma.matvec_t(&residual)?;
        let proposal: Vec<f64> = beta.iter().zip(grad.iter()).map(|(b, g)| b + step * g).collect();
        let next = largest_s(&proposal, cfg.sparsity_s);
        if next.is_empty() {
            termination = Termination::Stagnated;
            break;
        }
        iterations += 1;
        let fit = restricted_least_squares(sigma, e, &next)?;
        regularized |= fit.regularized;
        beta = fit.beta;
        let fitted = sigma.matvec(&beta)?;
        residual = e.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
        if norm_inf(&residual) <= cfg.tol {
            termination = Termination::ResidualBelowLambda;
        } else if next == support {
            termination = Termination::Converged;
        }
        support = next;
    }
    Ok(GissResult {
        final_residual_inf: norm_inf(&residual),
        support,
        beta,
        iterations,
        trace: None,
        termination,
        regularized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_one_iteration() {
        let res = htp_solve_column(&DenseMatrix::identity(5), &DenseVector::unit(5, 3), &HtpConfig::new(1))
            .unwrap();
        assert_eq!(res.beta, DenseVector::unit(5, 3));
        assert_eq!(res.iterations, 1);
        assert_eq!(res.termination, Termination::ResidualBelowLambda);
    }

    #[test]
    fn largest_s_ties_and_zeros() {
        assert_eq!(largest_s(&[0.5, -1.0, 0.5, 0.0], 2).as_slice(), &[0, 1]);
        assert_eq!(largest_s(&[0.0, 2.0, 0.0], 3).as_slice(), &[1]);
    }

    #[test]
    fn rejects_bad_sparsity() {
        let sigma = DenseMatrix::identity(3);
        assert!(htp_solve_column(&sigma, &[1.0, 0.0, 0.0], &HtpConfig::new(0)).is_err());
        assert!(htp_solve_column(&sigma, &[1.0, 0.0, 0.0], &HtpConfig::new(4)).is_err());
    }

    #[test]
    fn output_never_exceeds_sparsity() {
        let sigma = DenseMatrix::from_fn(12, 12, |i, j| 0.3f64.powi((i as i32 - j as i32).abs()));
        let e: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        for s in 1..=5 {
            let res = htp_solve_column(&sigma, &e, &HtpConfig::new(s)).unwrap();
            assert!(res.beta.iter().filter(|v| **v != 0.0).count() <= s);
            assert!(res.support.len() <= s);
        }
    }
}
