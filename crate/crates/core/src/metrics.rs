//! Loss norms, support recovery rates and the theory-side diagnostics:
//! mutual incoherence, Gaussian stopping levels and error bounds.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, DenseMatrix, POWER_MAX_ITER};

pub const OPERATOR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frobenius: f64,
    pub matrix_l1: f64,
    pub operator: f64,
    pub elem_inf: f64,
    pub relative_frobenius: f64,
    pub tp_pct: f64,
    pub tn_pct: f64,
    /// Keyed by the threshold's display form.
    pub nnz_at: BTreeMap<String, usize>,
    pub wall_time_s: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "frobenius,matrix_l1,operator,elem_inf,relative_frobenius,tp_pct,tn_pct,wall_time_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.frobenius,
            self.matrix_l1,
            self.operator,
            self.elem_inf,
            self.relative_frobenius,
            self.tp_pct,
            self.tn_pct,
            self.wall_time_s
        )
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Compares `estimate` with `truth`; the first threshold drives TP/TN.
pub fn compare(estimate: &DenseMatrix, truth: &DenseMatrix, thresholds: &[f64]) -> Result<MetricsReport> {
    if estimate.shape() != truth.shape() {
        return Err(Error::DimensionMismatch {
            expected: truth.shape(),
            got: estimate.shape(),
        });
    }
    let delta = estimate.sub(truth)?;
    let frobenius = delta.frobenius_norm();
    let truth_norm = truth.frobenius_norm();
    let operator = if delta.max_abs() == 0.0 {
        0.0
    } else {
        spectral_norm(&delta, OPERATOR_TOL, POWER_MAX_ITER)
    };
    let t0 = thresholds.first().copied().unwrap_or(0.0);
    let (mut pos, mut tp, mut neg, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (e, t) in estimate.as_slice().iter().zip(truth.as_slice()) {
        if *t != 0.0 {
            pos += 1;
            tp += (e.abs() > t0) as usize;
        } else {
            neg += 1;
            tn += (e.abs() <= t0) as usize;
        }
    }
    let pct = |num: usize, den: usize| if den == 0 { 100.0 } else { 100.0 * num as f64 / den as f64 };
    let nnz_at = thresholds
        .iter()
        .map(|t| (format!("{t:e}"), estimate.count_above(*t)))
        .collect();
    Ok(MetricsReport {
        frobenius,
        matrix_l1: delta.l1_norm(),
        operator,
        elem_inf: delta.max_abs(),
        relative_frobenius: if truth_norm > 0.0 { frobenius / truth_norm } else { frobenius },
        tp_pct: pct(tp, pos),
        tn_pct: pct(tn, neg),
        nnz_at,
        wall_time_s: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncoherenceReport {
    pub mu: f64,
    pub s: usize,
    pub theta: f64,
    pub vartheta: f64,
    pub a1_holds: bool,
}

/// Mutual coherence of the columns of `Σ`, inner products scaled by `1/p`,
/// diagonal pairs excluded.
pub fn incoherence(sigma: &DenseMatrix, s: usize) -> Result<IncoherenceReport> {
    if !sigma.is_square() {
        return Err(Error::NotSquare {
            rows: sigma.rows(),
            cols: sigma.cols(),
        });
    }
    if s == 0 {
        return Err(Error::InvalidConfig("s must be >= 1".into()));
    }
    let p = sigma.rows();
    let gram = sigma.t_matmul(sigma)?;
    let mut mu: f64 = 0.0;
    for j in 0..p {
        for i in 0..j {
            mu = mu.max(gram.get(i, j).abs() / p as f64);
        }
    }
    let theta = 1.0 - mu * (s as f64 - 1.0);
    let vartheta = (1.0 - mu * (2.0 * s as f64 - 1.0)) / theta;
    Ok(IncoherenceReport {
        mu,
        s,
        theta,
        vartheta,
        a1_holds: mu < 1.0 / (2.0 * s as f64 - 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopThresholds {
    pub b_inf_l2case: f64,
    pub b_inf_linfcase: f64,
    /// `None` when `θ ≤ 0`.
    pub beta_min_l2: Option<f64>,
    pub beta_min_linf: Option<f64>,
}

/// Stopping levels and minimal signal sizes for residuals `N(0, ε²I)`.
pub fn gaussian_stop_thresholds(
    sigma: &DenseMatrix,
    epsilon: f64,
    varsigma: f64,
    s: usize,
) -> Result<StopThresholds> {
    let p = sigma.rows();
    if p < 2 {
        return Err(Error::InvalidConfig("p must be >= 2".into()));
    }
    if !(epsilon >= 0.0) || !(varsigma > 0.0) {
        return Err(Error::InvalidConfig("need epsilon >= 0 and varsigma > 0".into()));
    }
    let pf = p as f64;
    let logp = pf.ln();
    let logs = (s as f64).ln();
    let l2_factor = (1.0 + 2.0 * (logp / pf).sqrt()).sqrt();
    let sigma_l1 = sigma.l1_norm();
    let max_col_norm = (0..p)
        .map(|j| sigma.col(j).iter().map(|v| v * v).sum::<f64>().sqrt() / pf.sqrt())
        .fold(0.0, f64::max);
    let theta = incoherence(sigma, s)?.theta;
    let b_inf_l2case = epsilon * l2_factor;
    let b_inf_linfcase = 2.0 * epsilon / sigma_l1 * (max_col_norm * (1.0 + varsigma) * logp).sqrt();
    let (beta_min_l2, beta_min_linf) = if theta > 0.0 {
        (
            Some(2.0 * epsilon / theta.sqrt() * (l2_factor + (logs / pf).sqrt())),
            Some(
                2.0 * epsilon * (max_col_norm * (1.0 + varsigma) * s as f64 * logp).sqrt()
                    / (pf * theta * sigma_l1)
                    + 2.0 * epsilon * (logs / (pf * theta)).sqrt(),
            ),
        )
    } else {
        (None, None)
    };
    Ok(StopThresholds {
        b_inf_l2case,
        b_inf_linfcase,
        beta_min_l2,
        beta_min_linf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremBounds {
    /// `3 + (1+3pλ)/(1−pλ)`.
    pub factor: f64,
    pub rate: f64,
    /// `C · factor · M² · sqrt(log p / n)`.
    pub elem_inf_bound: f64,
}

pub fn theorem_bounds(m: f64, p: usize, n: usize, constant_c: f64, lambda: f64) -> Result<TheoremBounds> {
    if !(m > 0.0) || !(constant_c > 0.0) || n == 0 || p < 2 {
        return Err(Error::InvalidConfig("need M, C > 0, n >= 1 and p >= 2".into()));
    }
    let pl = p as f64 * lambda;
    if pl >= 1.0 {
        return Err(Error::BoundDegenerate(pl));
    }
    let factor = 3.0 + (1.0 + 3.0 * pl) / (1.0 - pl);
    let rate = ((p as f64).ln() / n as f64).sqrt();
    Ok(TheoremBounds {
        factor,
        rate,
        elem_inf_bound: constant_c * factor * m * m * rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::gen_case1;

    #[test]
    fn compare_identical_and_bumped() {
        let t = gen_case1(5).unwrap().omega;
        let r = compare(&t, &t, &[1e-4]).unwrap();
        assert_eq!((r.frobenius, r.operator, r.elem_inf, r.matrix_l1), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((r.tp_pct, r.tn_pct), (100.0, 100.0));
        assert_eq!(r.nnz_at["1e-4"], 13);
        let mut bumped = t.clone();
        bumped.set(0, 0, bumped.get(0, 0) + 0.5);
        let r = compare(&bumped, &t, &[1e-4]).unwrap();
        assert_eq!(r.elem_inf, 0.5);
        assert_eq!(r.frobenius, 0.5);
        assert!((r.operator - 0.5).abs() < 1e-8);
        assert!(compare(&DenseMatrix::identity(2), &t, &[]).is_err());
    }

    #[test]
    fn recovery_rates() {
        let truth = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let est = DenseMatrix::from_rows(&[&[1.0, 0.2], &[0.0, 0.001]]).unwrap();
        let r = compare(&est, &truth, &[0.01]).unwrap();
        assert_eq!(r.tp_pct, 50.0);
        assert_eq!(r.tn_pct, 50.0);
    }

    #[test]
    fn incoherence_examples() {
        let r = incoherence(&DenseMatrix::identity(4).scale(2.0), 2).unwrap();
        assert_eq!((r.mu, r.theta, r.vartheta), (0.0, 1.0, 1.0));
        assert!(r.a1_holds);
        // columns (a, b), (b, a) with 2ab/2 = 0.2
        let a = 0.2f64.sqrt();
        let b = 0.2 / a;
        let m = DenseMatrix::from_rows(&[&[a, b], &[b, a]]).unwrap();
        let r = incoherence(&m, 2).unwrap();
        assert!((r.mu - 0.2).abs() < 1e-15);
        assert!((r.theta - 0.8).abs() < 1e-15);
        assert!((r.vartheta - 0.5).abs() < 1e-14);
    }

    #[test]
    fn incoherence_case1() {
        let s = gen_case1(10).unwrap().sigma;
        let r = incoherence(&s, 3).unwrap();
        let mut mu: f64 = 0.0;
        for i in 0..10 {
            for j in 0..10 {
                if i != j {
                    let d: f64 = (0..10).map(|k| s.get(k, i) * s.get(k, j)).sum();
                    mu = mu.max(d.abs() / 10.0);
                }
            }
        }
        assert!((r.mu - mu).abs() < 1e-15);
        assert_eq!(r.a1_holds, mu < 0.2);
    }

    #[test]
    fn stop_threshold_values() {
        let sigma = DenseMatrix::identity(100);
        let t = gaussian_stop_thresholds(&sigma, 0.1, 1.0, 3).unwrap();
        let expected = 0.1 * (1.0 + 2.0 * (100f64.ln() / 100.0).sqrt()).sqrt();
        assert!((t.b_inf_l2case - expected).abs() < 1e-15);
        let zero = gaussian_stop_thresholds(&sigma, 0.0, 1.0, 3).unwrap();
        assert_eq!(zero.b_inf_l2case, 0.0);
        assert_eq!(zero.b_inf_linfcase, 0.0);
        assert_eq!(zero.beta_min_l2, Some(0.0));
        let mid = gaussian_stop_thresholds(&DenseMatrix::identity(100), 1.0, 1.0, 1).unwrap();
        let big = gaussian_stop_thresholds(&DenseMatrix::identity(1000), 1.0, 1.0, 1).unwrap();
        assert!(big.b_inf_l2case > 1.0 && big.b_inf_l2case < mid.b_inf_l2case);
    }

    #[test]
    fn bound_arithmetic() {
        let b = theorem_bounds(2.0, 100, 50, 1.5, 0.0).unwrap();
        assert!((b.elem_inf_bound - 4.0 * 1.5 * 4.0 * (100f64.ln() / 50.0).sqrt()).abs() < 1e-12);
        assert_eq!(theorem_bounds(1.0, 100, 50, 1.0, 0.005).unwrap().factor, 8.0);
        let a = theorem_bounds(1.0, 100, 50, 1.0, 0.001).unwrap();
        let q = theorem_bounds(1.0, 100, 200, 1.0, 0.001).unwrap();
        assert!((a.elem_inf_bound / q.elem_inf_bound - 2.0).abs() < 1e-12);
        assert!(matches!(theorem_bounds(1.0, 100, 50, 1.0, 0.01), Err(Error::BoundDegenerate(_))));
    }
}
