//! Greedy inverse scale space column solver with acceleration factor ρ.
//!
//! The solver tracks a dual variable `p(t)` that moves linearly in time
//! along `Σᵀr` between events. Coordinates whose clipped dual reaches
//! magnitude one form the active set; the primal iterate is the least-squares
//! fit of `e` restricted to that set. At each event the next saturation time
//! is found in closed form and stretched by `ρ ≥ 1`, so several coordinates
//! may saturate in one step.
//!
//! Iteration stops when `|e − Σβ|_∞ ≤ λ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, restricted_least_squares, DenseMatrix, DenseVector, IndexSet};

/// Clipped duals within this distance of ±1 count as saturated.
pub const SATURATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GissConfig {
    /// Stopping tolerance on `|e − Σβ|_∞`.
    pub lambda: f64,
    /// Acceleration factor applied to each crossing time.
    pub rho: f64,
    /// Iteration cap; `None` means `2p`.
    pub max_iters: Option<usize>,
    /// Relative level below which a gradient entry counts as zero when
    /// looking for crossings.
    pub ls_residual_tol: f64,
    /// Keep a `(t, |r|_∞, |support|)` record of every iteration.
    pub record_trace: bool,
}

impl Default for GissConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            rho: 1.0,
            max_iters: None,
            ls_residual_tol: 1e-10,
            record_trace: false,
        }
    }
}

impl GissConfig {
    pub fn new(lambda: f64, rho: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            rho,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.rho >= 1.0) || !self.rho.is_finite() {
            return Err(Error::InvalidConfig(format!("rho must be >= 1, got {}", self.rho)));
        }
        if self.max_iters == Some(0) {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.ls_residual_tol >= 0.0) {
            return Err(Error::InvalidConfig("ls_residual_tol must be >= 0".into()));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, p: usize) -> usize {
        self.max_iters.unwrap_or(2 * p).max(1)
    }
}

/// One iterate of a column solve.
#[derive(Debug, Clone, PartialEq)]
pub struct GissState {
    /// Current time `t_k`.
    pub t: f64,
    /// Dual after the last linear advance, before clipping.
    pub p: DenseVector,
    /// Clipped dual; a subgradient of `|β|₁`.
    pub p_tilde: DenseVector,
    /// Saturated coordinates `{ j : |p̃_j| = 1 }`.
    pub active: IndexSet,
    pub beta: DenseVector,
    pub residual: DenseVector,
    /// Number of least-squares fits performed so far.
    pub iter: usize,
    /// Whether any fit needed the ridge fallback.
    pub regularized: bool,
    /// `‖Σ‖_{L1}`, the scale for negligible gradient entries.
    col_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// `|r|_∞ ≤ λ`.
    ResidualBelowLambda,
    /// Iterative baseline reached its own convergence test.
    Converged,
    /// No further coordinate can saturate, or the fit broke down.
    Stagnated,
    MaxIters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub residual_inf: f64,
    pub support_size: usize,
}

/// Outcome of one column solve. Shared by every column solver.
#[derive(Debug, Clone, PartialEq)]
pub struct GissResult {
    pub beta: DenseVector,
    pub iterations: usize,
    /// `|e − Σβ|_∞`.
    pub final_residual_inf: f64,
    pub support: IndexSet,
    pub trace: Option<Vec<TracePoint>>,
    pub termination: Termination,
    pub regularized: bool,
}

fn check_shapes(sigma: &DenseMatrix, e: &[f64]) -> Result<()> {
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
    Ok(())
}

/// Clips to `[-1, 1]`, snapping values within [`SATURATION_TOL`] of ±1.
fn clip(v: f64) -> f64 {
    if v.abs() >= 1.0 - SATURATION_TOL {
        v.signum()
    } else {
        v
    }
}

fn saturated(p_tilde: &[f64]) -> IndexSet {
    IndexSet::from_unsorted(
        p_tilde
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() == 1.0)
            .map(|(j, _)| j)
            .collect(),
    )
}

/// Initial state: `t₁ = 1/|Σᵀe|_∞`, `p = t₁ Σᵀe`, `β = 0`, `r = e`.
pub fn giss_init(sigma: &DenseMatrix, e: &[f64]) -> Result<GissState> {
    check_shapes(sigma, e)?;
    let grad = sigma.matvec_t(e)?;
    let scale = grad.norm_inf();
    if scale == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let t = 1.0 / scale;
    let p: Vec<f64> = grad.iter().map(|g| g / scale).collect();
    let p_tilde: Vec<f64> = p.iter().map(|&v| clip(v)).collect();
    let active = saturated(&p_tilde);
    Ok(GissState {
        t,
        p: DenseVector::new(p)?,
        p_tilde: DenseVector::new(p_tilde)?,
        active,
        beta: DenseVector::zeros(sigma.cols()),
        residual: DenseVector::new(e.to_vec())?,
        iter: 0,
        regularized: false,
        col_scale: sigma.l1_norm(),
    })
}

/// Least-squares fit on the current active set and the new residual.
fn refit(mut state: GissState, sigma: &DenseMatrix, e: &[f64]) -> Result<GissState> {
    let fit = restricted_least_squares(sigma, e, &state.active)?;
    let fitted = sigma.matvec(&fit.beta)?;
    let residual: Vec<f64> = e.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    state.beta = fit.beta;
    state.residual = DenseVector::new(residual)?;
    state.regularized |= fit.regularized;
    state.iter += 1;
    Ok(state)
}

/// Advances the dual to the next (ρ-stretched) saturation time and clips it.
fn advance(mut state: GissState, sigma: &DenseMatrix, cfg: &GissConfig) -> Result<GissState> {
    let grad = sigma.matvec_t(&state.residual)?;
    let negligible = cfg.ls_residual_tol * state.col_scale * state.residual.norm_inf();
    let t = state.t;
    let mut first: Option<(f64, usize)> = None;
    for (j, (&g, &pj)) in grad.iter().zip(state.p_tilde.iter()).enumerate() {
        if state.active.contains(j) || state.beta[j] != 0.0 || g.abs() <= negligible {
            continue;
        }
        let candidate = t + (g.signum() - pj) / g;
        if candidate > t && first.is_none_or(|(best, _)| candidate < best) {
            first = Some((candidate, j));
        }
    }
    let (crossing, entering) = first.ok_or(Error::NoCrossing)?;
    let t_next = cfg.rho * crossing;
    let dt = t_next - t;
    let p: Vec<f64> = state
        .p_tilde
        .iter()
        .zip(grad.iter())
        .map(|(pj, g)| pj + dt * g)
        .collect();
    let mut p_tilde: Vec<f64> = p.iter().map(|&v| clip(v)).collect();
    // saturated coordinates stay saturated; the entering index saturates by construction
    for j in state.active.iter() {
        p_tilde[j] = state.p_tilde[j];
    }
    p_tilde[entering] = grad[entering].signum();
    state.active = saturated(&p_tilde);
    state.t = t_next;
    state.p = DenseVector::new(p)?;
    state.p_tilde = DenseVector::new(p_tilde)?;
    Ok(state)
}

/// One pass of the algorithm body: refit on the active set, then, unless
/// the residual already meets `λ`, move the dual to the next event.
pub fn giss_step(
    state: GissState,
    sigma: &DenseMatrix,
    e: &[f64],
    cfg: &GissConfig,
) -> Result<GissState> {
    check_shapes(sigma, e)?;
    let state = refit(state, sigma, e)?;
    if state.residual.norm_inf() <= cfg.lambda {
        return Ok(state);
    }
    advance(state, sigma, cfg)
}

/// Solves `min |β|₁ s.t. Σβ = e` along the greedy inverse scale space path
/// until `|e − Σβ|_∞ ≤ λ`.
///
/// A column that cannot reach the tolerance returns its last iterate with
/// [`Termination::Stagnated`] or [`Termination::MaxIters`].
pub fn giss_solve_column(sigma: &DenseMatrix, e: &[f64], cfg: &GissConfig) -> Result<GissResult> {
    cfg.validate()?;
    check_shapes(sigma, e)?;
    let mut trace = cfg.record_trace.then(Vec::new);
    let e_inf = norm_inf(e);
    if e_inf <= cfg.lambda {
        return Ok(GissResult {
            beta: DenseVector::zeros(sigma.cols()),
            iterations: 0,
            final_residual_inf: e_inf,
            support: IndexSet::empty(),
            trace,
            termination: Termination::ResidualBelowLambda,
            regularized: false,
        });
    }
    let cap = cfg.iteration_cap(sigma.cols());
    let mut state = giss_init(sigma, e)?;
    let mut last_fit: Option<GissState> = None;
    let termination = loop {
        let fitted = match refit(state.clone(), sigma, e) {
            Ok(s) => s,
            Err(Error::RankDeficient { .. }) => break Termination::Stagnated,
            Err(err) => return Err(err),
        };
        let residual_inf = fitted.residual.norm_inf();
        if let Some(trace) = trace.as_mut() {
            trace.push(TracePoint {
                t: fitted.t,
                residual_inf,
                support_size: fitted.active.len(),
            });
        }
        last_fit = Some(fitted.clone());
        if residual_inf <= cfg.lambda {
            break Termination::ResidualBelowLambda;
        }
        if fitted.iter >= cap {
            break Termination::MaxIters;
        }
        match advance(fitted, sigma, cfg) {
            Ok(next) => state = next,
            Err(Error::NoCrossing) => break Termination::Stagnated,
            Err(err) => return Err(err),
        }
    };
    Ok(match last_fit {
        Some(fit) => GissResult {
            final_residual_inf: fit.residual.norm_inf(),
            support: fit.active,
            beta: fit.beta,
            iterations: fit.iter,
            trace,
            termination,
            regularized: fit.regularized,
        },
        None => GissResult {
            beta: DenseVector::zeros(sigma.cols()),
            iterations: 0,
            final_residual_inf: e_inf,
            support: IndexSet::empty(),
            trace,
            termination,
            regularized: false,
        },
    })
}
