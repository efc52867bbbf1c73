//! Column-wise precision matrix estimation: solve `p` constrained ℓ1
//! problems against `Σ + γI`, symmetrize by the smaller-magnitude rule and
//! threshold.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    admm_solve_columns_with, htp_solve_column_with_step, ADMM_LANES, htp_step_size, AdmmConfig, AdmmProjector,
    HtpConfig,
};
use crate::error::{Error, Result};
use crate::giss::{giss_solve_column, GissConfig, GissResult, Termination};
use crate::linalg::{DenseMatrix, DenseVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaRule {
    Fixed { value: f64 },
    /// `λ = c · sqrt(log p / n)`.
    ScaledRoot { c: f64 },
}

impl LambdaRule {
    pub fn resolve(&self, p: usize, n_samples: usize) -> Result<f64> {
        let lambda = match *self {
            LambdaRule::Fixed { value } => value,
            LambdaRule::ScaledRoot { c } => {
                if n_samples == 0 || p < 2 {
                    return Err(Error::InvalidConfig(
                        "scaled lambda needs n > 0 and p >= 2".into(),
                    ));
                }
                c * ((p as f64).ln() / n_samples as f64).sqrt()
            }
        };
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverKind {
    Giss { rho: f64 },
    Htp { s: usize },
    AdmmEq,
    AdmmIneq,
}

impl SolverKind {
    pub fn label(&self) -> String {
        match self {
            SolverKind::Giss { rho } if *rho == 1.0 => "GISS".into(),
            SolverKind::Giss { rho } => format!("GISS_rho{rho}"),
            SolverKind::Htp { .. } => "HTP".into(),
            SolverKind::AdmmEq => "ADMM".into(),
            SolverKind::AdmmIneq => "ADMM_lambda".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub lambda_rule: LambdaRule,
    pub gamma: f64,
    pub solver: SolverKind,
    pub threshold: f64,
    pub parallel_columns: bool,
    /// Primal and dual tolerance of the ADMM solvers.
    pub admm_tol: f64,
    pub admm_max_iters: usize,
}

impl EstimatorConfig {
    pub fn new(lambda_rule: LambdaRule, solver: SolverKind) -> Self {
        Self {
            lambda_rule,
            gamma: 0.0,
            solver,
            threshold: 0.0,
            parallel_columns: true,
            admm_tol: 1e-9,
            admm_max_iters: 10_000,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// Sets `γ = sqrt(log p / n)`.
    pub fn with_gamma_preset(mut self, p: usize, n: usize) -> Self {
        self.gamma = gamma_preset(p, n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidConfig("gamma must be >= 0".into()));
        }
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return Err(Error::InvalidConfig("threshold must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn gamma_preset(p: usize, n: usize) -> f64 {
    ((p as f64).ln() / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    pub omega_hat: DenseMatrix,
    /// Indexed by column; failed columns are left at zero in `omega_hat`.
    pub column_results: Vec<std::result::Result<GissResult, Error>>,
    pub symmetrized: bool,
    pub lambda_used: f64,
    pub gamma_used: f64,
}

impl PrecisionEstimate {
    pub fn failures(&self) -> usize {
        self.column_results
            .iter()
            .filter(|r| !matches!(r, Ok(res) if matches!(res.termination, Termination::ResidualBelowLambda | Termination::Converged)))
            .count()
    }

    pub fn total_iterations(&self) -> usize {
        self.column_results.iter().flatten().map(|r| r.iterations).sum()
    }

    /// One JSON object per column.
    pub fn write_telemetry<W: Write>(&self, mut w: W) -> Result<()> {
        for (column, res) in self.column_results.iter().enumerate() {
            let line = match res {
                Ok(r) => serde_json::json!({
                    "column": column,
                    "iterations": r.iterations,
                    "final_residual": r.final_residual_inf,
                    "support_size": r.support.len(),
                    "termination": r.termination,
                    "regularized": r.regularized,
                }),
                Err(e) => serde_json::json!({
                    "column": column,
                    "error": e.to_string(),
                }),
            };
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// `Σ + γI`.
pub fn regularize_covariance(sigma: &DenseMatrix, gamma: f64) -> DenseMatrix {
    let mut out = sigma.clone();
    if gamma != 0.0 {
        for i in 0..sigma.rows().min(sigma.cols()) {
            out.set(i, i, out.get(i, i) + gamma);
        }
    }
    out
}

/// Keeps, for each pair, the entry of smaller magnitude; ties keep the
/// upper-triangle entry.
pub fn symmetrize(omega: &DenseMatrix) -> Result<DenseMatrix> {
    if !omega.is_square() {
        return Err(Error::NotSquare {
            rows: omega.rows(),
            cols: omega.cols(),
        });
    }
    let p = omega.rows();
    let mut out = omega.clone();
    for j in 0..p {
        for i in 0..j {
            let a = omega.get(i, j);
            let b = omega.get(j, i);
            let keep = if a.abs() <= b.abs() { a } else { b };
            out.set(i, j, keep);
            out.set(j, i, keep);
        }
    }
    Ok(out)
}

enum Prepared {
    Giss(GissConfig),
    Htp(HtpConfig, f64),
    Admm(AdmmConfig, AdmmProjector),
}

fn prepare(sigma: &DenseMatrix, cfg: &EstimatorConfig, lambda: f64) -> Result<Prepared> {
    Ok(match cfg.solver {
        SolverKind::Giss { rho } => Prepared::Giss(GissConfig::new(lambda, rho)?),
        SolverKind::Htp { s } => {
            let mut h = HtpConfig::new(s);
            h.tol = lambda.max(h.tol);
            h.validate(sigma.rows())?;
            Prepared::Htp(h, htp_step_size(sigma, &h))
        }
        SolverKind::AdmmEq | SolverKind::AdmmIneq => {
            let mut a = if cfg.solver == SolverKind::AdmmEq {
                AdmmConfig::equality(cfg.admm_tol)
            } else {
                if lambda <= 0.0 {
                    return Err(Error::InvalidConfig("ADMM_lambda needs lambda > 0".into()));
                }
                AdmmConfig::inequality(lambda, cfg.admm_tol)
            };
            a.max_iters = cfg.admm_max_iters;
            a.validate()?;
            let projector = AdmmProjector::new(sigma, a.is_equality())?;
            Prepared::Admm(a, projector)
        }
    })
}


/// Solves the unit-vector targets `cols`; results in the same order.
fn solve_block(prepared: &Prepared, sigma: &DenseMatrix, cols: std::ops::Range<usize>) -> Vec<Result<GissResult>> {
    let p = sigma.rows();
    let targets: Vec<DenseVector> = cols.map(|i| DenseVector::unit(p, i)).collect();
    match prepared {
        Prepared::Giss(c) => targets.iter().map(|e| giss_solve_column(sigma, e, c)).collect(),
        Prepared::Htp(c, step) => targets
            .iter()
            .map(|e| htp_solve_column_with_step(sigma, e, c, *step))
            .collect(),
        Prepared::Admm(c, proj) => {
            let refs: Vec<&[f64]> = targets.iter().map(|t| t.as_slice()).collect();
            match admm_solve_columns_with(proj, sigma, &refs, c) {
                Ok(v) => v,
                Err(e) => refs.iter().map(|_| Err(e.clone())).collect(),
            }
        }
    }
}

/// Estimates `Ω̂` from a covariance (exact or sample) with `n_samples`
/// observations; `n_samples` only enters through the λ rule.
pub fn estimate_precision(
    sigma: &DenseMatrix,
    cfg: &EstimatorConfig,
    n_samples: usize,
) -> Result<PrecisionEstimate> {
    cfg.validate()?;
    if !sigma.is_square() {
        return Err(Error::NotSquare {
            rows: sigma.rows(),
            cols: sigma.cols(),
        });
    }
    let asym = sigma.max_asymmetry();
    if asym > 1e-10 * sigma.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let p = sigma.rows();
    let lambda = cfg.lambda_rule.resolve(p, n_samples)?;
    let sigma_g = regularize_covariance(sigma, cfg.gamma);
    let prepared = prepare(&sigma_g, cfg, lambda)?;

    let block = if matches!(prepared, Prepared::Admm(..)) { ADMM_LANES } else { 1 };
    let starts: Vec<usize> = (0..p).step_by(block).collect();
    let run = |&s: &usize| solve_block(&prepared, &sigma_g, s..(s + block).min(p));
    let column_results: Vec<Result<GissResult>> = if cfg.parallel_columns {
        starts.par_iter().flat_map_iter(run).collect()
    } else {
        starts.iter().flat_map(run).collect()
    };

    let mut raw = DenseMatrix::zeros(p, p);
    for (j, res) in column_results.iter().enumerate() {
        if let Ok(r) = res {
            for (i, v) in r.beta.iter().enumerate() {
                if *v != 0.0 {
                    raw.set(i, j, *v);
                }
            }
        }
    }
    let sym = symmetrize(&raw)?;
    let omega_hat = if cfg.threshold > 0.0 {
        sym.thresholded(cfg.threshold)
    } else {
        sym
    };
    Ok(PrecisionEstimate {
        omega_hat,
        column_results,
        symmetrized: true,
        lambda_used: lambda,
        gamma_used: cfg.gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Diagnostic {
    pub omega0_l1: f64,
    pub max_deviation: f64,
    /// `‖Ω₀‖_{L1} · (max|σ̂ − σ⁰| + γ)`.
    pub product: f64,
    pub lambda: f64,
    pub inv_p: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
    /// `(3 + (1+3pλ)/(1−pλ)) · λ · ‖Ω₀‖_{L1}`.
    pub error_bound: f64,
}

impl Lemma1Diagnostic {
    pub fn holds(&self) -> bool {
        self.lower_holds && self.upper_holds
    }
}

pub fn check_lemma1_hypothesis(
    omega0: &DenseMatrix,
    sigma_n: &DenseMatrix,
    sigma0: &DenseMatrix,
    gamma: f64,
    lambda: f64,
) -> Result<Lemma1Diagnostic> {
    let p = omega0.rows();
    for m in [omega0, sigma_n, sigma0] {
        if m.shape() != (p, p) {
            return Err(Error::DimensionMismatch {
                expected: (p, p),
                got: m.shape(),
            });
        }
    }
    let pl = p as f64 * lambda;
    if pl >= 1.0 {
        return Err(Error::BoundDegenerate(pl));
    }
    let omega0_l1 = omega0.l1_norm();
    let max_deviation = sigma_n.sub(sigma0)?.max_abs();
    let product = omega0_l1 * (max_deviation + gamma);
    let inv_p = 1.0 / p as f64;
    Ok(Lemma1Diagnostic {
        omega0_l1,
        max_deviation,
        product,
        lambda,
        inv_p,
        lower_holds: product <= lambda,
        upper_holds: lambda <= inv_p,
        error_bound: (3.0 + (1.0 + 3.0 * pl) / (1.0 - pl)) * lambda * omega0_l1,
    })
}
