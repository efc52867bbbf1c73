//! ADMM for the column problems.
//!
//! Equality form, `min |β|₁ s.t. Σβ = e`: split `x = z` with `x` confined to
//! the affine set and `z` carrying the ℓ1 term,
//!
//! ```text
//! x ← Π(z − u),  z ← shrink(x + u, 1/ρ),  u ← u + x − z,
//! Π(v) = v − Σᵀ(ΣΣᵀ)⁻¹(Σv − e).
//! ```
//!
//! Inequality form, `min |β|₁ s.t. |Σβ − e|_∞ ≤ λ`: add the slack
//! `w = Σx − e`, project `(x, w)` onto `{Σx − w = e}` (Gram `ΣΣᵀ + I`),
//! shrink the `x` copy and clip the `w` copy to `[−λ, λ]`.
//!
//! Both projections are formed once per `Σ` as an affine map
//! `v ↦ P v + Q e` and shared by every column. The returned coefficients are
//! the projected iterate `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::giss::{GissResult, Termination};
use crate::linalg::{
    cholesky_with_ridge, norm2, norm_inf, DenseMatrix, DenseVector, GRAM_RIDGE,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub penalty_rho: f64,
    pub max_iters: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    /// Box half-width for the inequality form; zero selects the equality form.
    pub lambda: f64,
}

impl AdmmConfig {
    pub fn equality(tol: f64) -> Self {
        Self {
            penalty_rho: 1.0,
            max_iters: 10_000,
            primal_tol: tol,
            dual_tol: tol,
            lambda: 0.0,
        }
    }

    pub fn inequality(lambda: f64, tol: f64) -> Self {
        Self {
            lambda,
            ..Self::equality(tol)
        }
    }

    pub fn is_equality(&self) -> bool {
        self.lambda == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.penalty_rho > 0.0) || !self.penalty_rho.is_finite() {
            return Err(Error::InvalidConfig("penalty_rho must be > 0".into()));
        }
        if !(self.primal_tol > 0.0) || !(self.dual_tol > 0.0) {
            return Err(Error::InvalidConfig("ADMM tolerances must be > 0".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig("lambda must be >= 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Cached affine projection for one `Σ` and one ADMM form.
#[derive(Debug, Clone)]
pub struct AdmmProjector {
    dim: usize,
    equality: bool,
    /// `I − QM`, acting on the stacked variable.
    projection: DenseMatrix,
    /// `Mᵀ(MMᵀ)⁻¹`; the affine offset is `Q e`.
    offset: DenseMatrix,
    regularized: bool,
}

impl AdmmProjector {
    /// Factors `ΣΣᵀ` (equality) or `ΣΣᵀ + I` (inequality) once.
    pub fn new(sigma: &DenseMatrix, equality: bool) -> Result<Self> {
        if !sigma.is_square() {
            return Err(Error::NotSquare {
                rows: sigma.rows(),
                cols: sigma.cols(),
            });
        }
        let p = sigma.rows();
        let mut gram = sigma.matmul(&sigma.transpose())?;
        if !equality {
            for i in 0..p {
                gram.set(i, i, gram.get(i, i) + 1.0);
            }
        }
        let (chol, regularized) = cholesky_with_ridge(&gram, GRAM_RIDGE)?;
        // K = gram⁻¹, column by column
        let mut k_cols = Vec::with_capacity(p);
        for j in 0..p {
            k_cols.push(chol.solve(&DenseVector::unit(p, j)));
        }
        let k = DenseMatrix::from_columns(&k_cols)?;
        let sigma_t_k = sigma.t_matmul(&k)?;
        let n = if equality { p } else { 2 * p };
        // M = [Σ, −I] for the inequality form, M = Σ otherwise
        let offset = if equality {
            sigma_t_k.clone()
        } else {
            DenseMatrix::from_fn(n, p, |i, j| {
                if i < p {
                    sigma_t_k.get(i, j)
                } else {
                    -k.get(i - p, j)
                }
            })
        };
        let q_sigma = offset.matmul(sigma)?;
        let raw = DenseMatrix::from_fn(n, n, |i, j| {
            let qm = if j < p {
                q_sigma.get(i, j)
            } else {
                -offset.get(i, j - p)
            };
            let id = if i == j { 1.0 } else { 0.0 };
            id - qm
        });
        // orthogonal projector: symmetric up to rounding, made exact so that
        // columns can serve as rows
        let projection = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (raw.get(i, j) + raw.get(j, i)));
        Ok(Self {
            dim: p,
            equality,
            projection,
            offset,
            regularized,
        })
    }

    pub fn is_equality(&self) -> bool {
        self.equality
    }

    pub fn regularized(&self) -> bool {
        self.regularized
    }
}

/// Componentwise soft threshold: `sign(x) · max(|x| − κ, 0)`.
pub fn shrink(x: f64, kappa: f64) -> f64 {
    if x > kappa {
        x - kappa
    } else if x < -kappa {
        x + kappa
    } else {
        0.0
    }
}

/// Builds the projector for `Σ` and solves one column.
pub fn admm_solve_column(sigma: &DenseMatrix, e: &[f64], cfg: &AdmmConfig) -> Result<GissResult> {
    let projector = AdmmProjector::new(sigma, cfg.is_equality())?;
    admm_solve_column_with(&projector, sigma, e, cfg)
}

/// Solves one column with a projector built for the same `Σ`.
pub fn admm_solve_column_with(
    projector: &AdmmProjector,
    sigma: &DenseMatrix,
    e: &[f64],
    cfg: &AdmmConfig,
) -> Result<GissResult> {
    admm_solve_columns_with(projector, sigma, &[e], cfg)?
        .pop()
        .expect("one target in, one result out")
}

/// Columns advanced together by [`admm_solve_columns_with`].
pub const ADMM_LANES: usize = 8;

type Lanes = [f64; ADMM_LANES];

/// Solves several right-hand sides at once, sharing each pass over the
/// projection. Every column follows exactly the arithmetic of a solo solve.
pub fn admm_solve_columns_with(
    projector: &AdmmProjector,
    sigma: &DenseMatrix,
    targets: &[&[f64]],
    cfg: &AdmmConfig,
) -> Result<Vec<Result<GissResult>>> {
    cfg.validate()?;
    if projector.equality != cfg.is_equality() {
        return Err(Error::InvalidConfig(
            "projector form does not match the configured ADMM variant".into(),
        ));
    }
    let p = projector.dim;
    if sigma.shape() != (p, p) {
        return Err(Error::DimensionMismatch {
            expected: (p, p),
            got: sigma.shape(),
        });
    }
    if let Some(bad) = targets.iter().find(|e| e.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: (p, 1),
            got: (bad.len(), 1),
        });
    }
    let mut out = Vec::with_capacity(targets.len());
    for chunk in targets.chunks(ADMM_LANES) {
        out.extend(solve_lanes(projector, sigma, chunk, cfg)?);
    }
    Ok(out)
}

fn solve_lanes(
    projector: &AdmmProjector,
    sigma: &DenseMatrix,
    targets: &[&[f64]],
    cfg: &AdmmConfig,
) -> Result<Vec<Result<GissResult>>> {
    let p = projector.dim;
    let n = projector.projection.rows();
    let b = targets.len();
    let kappa = 1.0 / cfg.penalty_rho;
    let lambda = cfg.lambda;

    let mut offset: Vec<Lanes> = vec![[0.0; ADMM_LANES]; n];
    for (c, e) in targets.iter().enumerate() {
        for (i, v) in projector.offset.matvec(e)?.iter().enumerate() {
            offset[i][c] = *v;
        }
    }
    let mut x: Vec<Lanes> = vec![[0.0; ADMM_LANES]; n];
    let mut xs: Vec<Lanes> = vec![[0.0; ADMM_LANES]; n];
    let mut z: Vec<Lanes> = vec![[0.0; ADMM_LANES]; n];
    let mut u: Vec<Lanes> = vec![[0.0; ADMM_LANES]; n];
    let mut v: Vec<Lanes> = vec![[0.0; ADMM_LANES]; n];
    let mut active = [false; ADMM_LANES];
    active[..b].iter_mut().for_each(|a| *a = true);
    let mut iterations = [0usize; ADMM_LANES];
    let mut done = [Termination::MaxIters; ADMM_LANES];
    let mut remaining = b;
    for _ in 0..cfg.max_iters {
        if remaining == 0 {
            break;
        }
        for ((vi, zi), ui) in v.iter_mut().zip(&z).zip(&u) {
            for c in 0..ADMM_LANES {
                vi[c] = zi[c] - ui[c];
            }
        }
        for (i, out) in xs.iter_mut().enumerate() {
            let mut acc = offset[i];
            for (pij, vj) in projector.projection.col(i).iter().zip(&v) {
                for c in 0..ADMM_LANES {
                    acc[c] += pij * vj[c];
                }
            }
            *out = acc;
        }
        let mut primal: Lanes = [0.0; ADMM_LANES];
        let mut dual: Lanes = [0.0; ADMM_LANES];
        for i in 0..n {
            for c in 0..b {
                if !active[c] {
                    continue;
                }
                x[i][c] = xs[i][c];
                let target = x[i][c] + u[i][c];
                let znew = if i < p {
                    shrink(target, kappa)
                } else {
                    target.clamp(-lambda, lambda)
                };
                dual[c] += (znew - z[i][c]).powi(2);
                z[i][c] = znew;
                let gap = x[i][c] - znew;
                u[i][c] += gap;
                primal[c] += gap * gap;
            }
        }
        for c in 0..b {
            if !active[c] {
                continue;
            }
            iterations[c] += 1;
            if primal[c].sqrt() <= cfg.primal_tol && cfg.penalty_rho * dual[c].sqrt() <= cfg.dual_tol {
                done[c] = Termination::Converged;
                active[c] = false;
                remaining -= 1;
            }
        }
    }
    Ok(targets
        .iter()
        .enumerate()
        .map(|(c, e)| {
            let beta: Vec<f64> = (0..p).map(|i| x[i][c]).collect();
            finish(sigma, e, beta, iterations[c], done[c], projector.regularized)
        })
        .collect())
}

fn finish(
    sigma: &DenseMatrix,
    e: &[f64],
    beta: Vec<f64>,
    iterations: usize,
    termination: Termination,
    regularized: bool,
) -> Result<GissResult> {
    let beta = DenseVector::new(beta)?;
    let fitted = sigma.matvec(&beta)?;
    let residual: Vec<f64> = e.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    Ok(GissResult {
        final_residual_inf: norm_inf(&residual),
        support: beta.support(),
        beta,
        iterations,
        trace: None,
        termination,
        regularized,
    })
}

/// ℓ2 norm of the primal gap, exposed for diagnostics.
pub fn primal_gap(x: &[f64], z: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
    norm2(&d)
}
