//! Synthetic ground truth: the AR(1) covariance with its tridiagonal inverse,
//! random sparse precision matrices with a prescribed condition number,
//! Gaussian sampling and the sample covariance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, extreme_eigenvalues, spd_inverse, DenseMatrix, POWER_TOL};
use crate::rng::{derive_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Case1,
    Case2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub case: Case,
    pub p: usize,
    /// Sample count; 0 means the exact covariance is used.
    pub n: usize,
    pub seed: u64,
    pub replicate: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidConfig(format!("p must be >= 2, got {}", self.p)));
        }
        if self.case == Case::Case2 && self.n == 0 {
            return Err(Error::InvalidConfig("case2 needs n >= 1".into()));
        }
        Ok(())
    }

    /// Seed of this replicate's stream.
    pub fn stream_seed(&self) -> u64 {
        derive_seed(self.seed, self.replicate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub sigma: DenseMatrix,
    pub omega: DenseMatrix,
    /// Column-major, `true` where `ω_ij ≠ 0`.
    pub support_mask: Vec<bool>,
}

impl GroundTruth {
    fn new(sigma: DenseMatrix, omega: DenseMatrix) -> Self {
        let support_mask = omega.as_slice().iter().map(|v| *v != 0.0).collect();
        Self {
            sigma,
            omega,
            support_mask,
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma.rows()
    }

    pub fn nnz(&self) -> usize {
        self.support_mask.iter().filter(|b| **b).count()
    }

    pub fn in_support(&self, i: usize, j: usize) -> bool {
        self.support_mask[j * self.dim() + i]
    }
}

/// `Σ_ij = 0.5^|i−j|` and its exact tridiagonal inverse.
pub fn gen_case1(p: usize) -> Result<GroundTruth> {
    if p < 2 {
        return Err(Error::InvalidConfig(format!("p must be >= 2, got {p}")));
    }
    let sigma = DenseMatrix::from_fn(p, p, |i, j| 0.5f64.powi(i.abs_diff(j) as i32));
    let omega = DenseMatrix::from_fn(p, p, |i, j| {
        if i == j {
            if i == 0 || i == p - 1 {
                4.0 / 3.0
            } else {
                5.0 / 3.0
            }
        } else if i.abs_diff(j) == 1 {
            -2.0 / 3.0
        } else {
            0.0
        }
    });
    Ok(GroundTruth::new(sigma, omega))
}

/// Symmetric `B` with zero diagonal and off-diagonal entries 0.5 w.p. 0.1.
pub fn draw_case2_pattern(p: usize, seed: u64) -> DenseMatrix {
    let mut stream = Stream::new(seed);
    let mut b = DenseMatrix::zeros(p, p);
    for j in 1..p {
        for i in 0..j {
            if stream.bernoulli(0.1) {
                b.set(i, j, 0.5);
                b.set(j, i, 0.5);
            }
        }
    }
    b
}

/// Shift making `cond(B + δI) = p`.
pub fn condition_shift(lambda_min: f64, lambda_max: f64, p: usize) -> f64 {
    (lambda_max - p as f64 * lambda_min) / (p as f64 - 1.0)
}

/// Random sparse precision matrix with unit diagonal.
///
/// `Ω = D^{-1/2}(B + δI)D^{-1/2}`, `D = diag(B + δI)`, `Σ = Ω⁻¹`.
pub fn gen_case2(p: usize, seed: u64) -> Result<GroundTruth> {
    if p < 2 {
        return Err(Error::InvalidConfig(format!("p must be >= 2, got {p}")));
    }
    let b = draw_case2_pattern(p, seed);
    if b.max_abs() == 0.0 {
        return Err(Error::DegenerateDraw);
    }
    let (lmin, lmax) = extreme_eigenvalues(&b, POWER_TOL);
    if !(lmax > lmin) {
        return Err(Error::DegenerateDraw);
    }
    let delta = condition_shift(lmin, lmax, p);
    // diag(B) = 0, so D = δI and the normalization divides by δ
    let omega = DenseMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { b.get(i, j) / delta });
    let sigma = spd_inverse(&omega)?;
    Ok(GroundTruth::new(sigma, omega))
}

/// Draws from `gen_case2` with successive derived seeds until one is usable.
pub fn gen_case2_redraw(p: usize, seed: u64) -> Result<(GroundTruth, u64)> {
    let mut attempt = seed;
    for k in 0..64 {
        match gen_case2(p, attempt) {
            Err(Error::DegenerateDraw) => attempt = derive_seed(seed, k + 1),
            other => return other.map(|g| (g, attempt)),
        }
    }
    Err(Error::DegenerateDraw)
}

/// `n` rows i.i.d. `N(0, Σ)` as `L z`, `L = chol(Σ)`.
pub fn sample_gaussian(sigma: &DenseMatrix, n: usize, seed: u64) -> Result<DenseMatrix> {
    let l = cholesky(sigma)?;
    let p = sigma.rows();
    let mut stream = Stream::new(seed);
    let mut data = DenseMatrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for k in 0..n {
        for zi in z.iter_mut() {
            *zi = stream.normal();
        }
        for i in 0..p {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += l.get(i, j) * zj;
            }
            data.set(k, i, acc);
        }
    }
    Ok(data)
}

/// Centered covariance with the `1/(n−1)` scaling; rows are observations.
pub fn sample_covariance(data: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, p) = data.shape();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let centered: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let col = data.col(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            col.iter().map(|v| v - mean).collect()
        })
        .collect();
    let scale = 1.0 / (n as f64 - 1.0);
    let mut out = DenseMatrix::zeros(p, p);
    for j in 0..p {
        for i in 0..=j {
            let v: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>() * scale;
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_dev_from_identity(m: &DenseMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..m.cols() {
            for i in 0..m.rows() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((m.get(i, j) - target).abs());
            }
        }
        worst
    }

    #[test]
    fn case1_small_inverses() {
        let g = gen_case1(2).unwrap();
        assert_eq!(g.omega.as_slice(), &[4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0]);
        let g = gen_case1(3).unwrap();
        assert_eq!(g.omega.diag(), vec![4.0 / 3.0, 5.0 / 3.0, 4.0 / 3.0]);
        assert_eq!(g.omega.get(0, 2), 0.0);
        assert!(max_dev_from_identity(&g.sigma.matmul(&g.omega).unwrap()) <= 1e-12);
    }

    #[test]
    fn case1_counts_and_products() {
        for p in [2, 5, 17, 200, 500] {
            let g = gen_case1(p).unwrap();
            assert_eq!(g.nnz(), 3 * p - 2);
            assert!(max_dev_from_identity(&g.sigma.matmul(&g.omega).unwrap()) <= 1e-10);
        }
        assert!(gen_case1(1).is_err());
    }

    #[test]
    fn condition_shift_solves_ratio() {
        let (lmin, lmax, p) = (-2.5, 7.0, 40);
        let d = condition_shift(lmin, lmax, p);
        assert!(((lmax + d) / (lmin + d) - p as f64).abs() < 1e-12);
    }

    #[test]
    fn case2_unit_diagonal_and_inverse_pair() {
        for seed in 0..20 {
            let (g, _) = gen_case2_redraw(60, seed).unwrap();
            assert!(g.omega.diag().iter().all(|d| *d == 1.0));
            assert!(g.omega.is_symmetric(0.0));
            assert!(cholesky(&g.omega).is_ok());
            assert!(max_dev_from_identity(&g.sigma.matmul(&g.omega).unwrap()) <= 1e-8);
        }
    }

    #[test]
    fn case2_pattern_density() {
        let mut frac = 0.0;
        for seed in 0..1000 {
            let b = draw_case2_pattern(4, seed);
            frac += b.count_above(0.0) as f64 / 12.0;
            assert!(b.diag().iter().all(|d| *d == 0.0));
            assert!(b.is_symmetric(0.0));
        }
        frac /= 1000.0;
        assert!((0.08..=0.12).contains(&frac), "{frac}");
    }

    #[test]
    fn degenerate_draw_is_reported() {
        let degenerate = (0..10_000u64).find(|s| draw_case2_pattern(2, *s).max_abs() == 0.0).unwrap();
        assert_eq!(gen_case2(2, degenerate), Err(Error::DegenerateDraw));
        let (g, used) = gen_case2_redraw(2, degenerate).unwrap();
        assert_ne!(used, degenerate);
        assert_eq!(g.nnz(), 4);
    }

    #[test]
    fn gaussian_moments() {
        let data = sample_gaussian(&DenseMatrix::identity(2), 100_000, 11).unwrap();
        let s = sample_covariance(&data).unwrap();
        assert!(max_dev_from_identity(&s) <= 0.03);
        let data = sample_gaussian(&DenseMatrix::from_diag(&[4.0, 1.0]), 100_000, 12).unwrap();
        let s = sample_covariance(&data).unwrap();
        assert!((s.get(0, 0) / 4.0 - 1.0).abs() <= 0.03);
        assert!((s.get(1, 1) - 1.0).abs() <= 0.03);
    }

    #[test]
    fn gaussian_edge_cases() {
        assert_eq!(sample_gaussian(&DenseMatrix::identity(3), 0, 1).unwrap().shape(), (0, 3));
        let a = sample_gaussian(&DenseMatrix::identity(3), 5, 9).unwrap();
        let b = sample_gaussian(&DenseMatrix::identity(3), 5, 9).unwrap();
        assert_eq!(a, b);
        let bad = DenseMatrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(sample_gaussian(&bad, 3, 1), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn sample_covariance_by_hand() {
        let data = DenseMatrix::from_rows(&[&[0.0, 0.0], &[2.0, 0.0]]).unwrap();
        assert_eq!(sample_covariance(&data).unwrap().as_slice(), &[2.0, 0.0, 0.0, 0.0]);
        let constant = DenseMatrix::from_rows(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]).unwrap();
        assert_eq!(sample_covariance(&constant).unwrap().max_abs(), 0.0);
        let one = DenseMatrix::from_rows(&[&[1.0, 2.0]]).unwrap();
        assert_eq!(sample_covariance(&one), Err(Error::TooFewSamples(1)));
    }

    #[test]
    fn sample_covariance_matches_naive_loop() {
        let mut s = Stream::new(3);
        let data = DenseMatrix::from_fn(50, 3, |_, _| s.uniform() * 4.0 - 1.0);
        let fast = sample_covariance(&data).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let ma: f64 = (0..50).map(|k| data.get(k, a)).sum::<f64>() / 50.0;
                let mb: f64 = (0..50).map(|k| data.get(k, b)).sum::<f64>() / 50.0;
                let mut acc = 0.0;
                for k in 0..50 {
                    acc += (data.get(k, a) - ma) * (data.get(k, b) - mb);
                }
                assert!((fast.get(a, b) - acc / 49.0).abs() <= 1e-12);
            }
        }
        assert!(fast.is_symmetric(0.0));
    }

    #[test]
    fn scenario_validation_and_seeds() {
        let spec = ScenarioSpec { case: Case::Case2, p: 10, n: 0, seed: 1, replicate: 0 };
        assert!(spec.validate().is_err());
        let a = ScenarioSpec { n: 5, ..spec };
        let b = ScenarioSpec { replicate: 1, ..a };
        assert!(a.validate().is_ok());
        assert_ne!(a.stream_seed(), b.stream_seed());
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioSpec>(&json).unwrap(), a);
    }
}
