//! Replication harness: the AR(1) exact-covariance table, replicated
//! sparse-precision runs with mean/SE aggregation, and the sample-size sweep.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clime::{estimate_precision, EstimatorConfig, LambdaRule, SolverKind};
use crate::error::{Error, Result};
use crate::metrics::{compare, MetricsReport};
use crate::rng::derive_seed;
use crate::simulation::{gen_case1, gen_case2_redraw, sample_covariance, sample_gaussian, GroundTruth};

pub const CSV_SCHEMA: &str = "spm-bench/v1";
const SE_NOTE: &str = "se = sample sd / sqrt(replicates)";

/// Runs `f` on a pool sized by `SPM_THREADS` when set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var("SPM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStat {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStat {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation over `sqrt(count)`; zero for one value.
    pub fn se(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count as f64 - 1.0)).sqrt() / (self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    Measured,
    /// Writes zero times so that outputs are byte-stable.
    Omitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case1Row {
    pub solver: String,
    pub nnz_1e8: usize,
    pub nnz_1e4: usize,
    pub time_s: f64,
    pub relative_frobenius: f64,
    pub failures: usize,
}

fn timed<T>(timing: Timing, f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    let secs = match timing {
        Timing::Measured => start.elapsed().as_secs_f64(),
        Timing::Omitted => 0.0,
    };
    (out, secs)
}

fn open_csv(out: &Path, name: &str, comment: &str) -> Result<csv::Writer<BufWriter<File>>> {
    fs::create_dir_all(out)?;
    let mut w = BufWriter::new(File::create(out.join(name))?);
    writeln!(w, "# {CSV_SCHEMA} {comment}")?;
    Ok(csv::Writer::from_writer(w))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// HTP sparsity from the ground truth: the widest column of `Ω`.
pub fn truth_sparsity(truth: &GroundTruth) -> usize {
    let p = truth.dim();
    (0..p)
        .map(|j| (0..p).filter(|&i| truth.in_support(i, j)).count())
        .max()
        .unwrap_or(1)
}

/// Replaces an `Htp` entry's sparsity with the ground-truth value when zero.
fn resolve_solver(solver: SolverKind, truth: &GroundTruth) -> SolverKind {
    match solver {
        SolverKind::Htp { s: 0 } => SolverKind::Htp { s: truth_sparsity(truth) },
        other => other,
    }
}

/// Exact AR(1) covariance, every solver over all columns.
pub fn run_case1(
    p: usize,
    lambda: f64,
    solvers: &[SolverKind],
    timing: Timing,
    out: Option<&Path>,
) -> Result<Vec<Case1Row>> {
    if solvers.is_empty() {
        return Err(Error::InvalidConfig("at least one solver is required".into()));
    }
    let truth = gen_case1(p)?;
    let mut rows = Vec::with_capacity(solvers.len());
    for &solver in solvers {
        let solver = resolve_solver(solver, &truth);
        let mut cfg = EstimatorConfig::new(LambdaRule::Fixed { value: lambda }, solver);
        cfg.admm_tol = 1e-9;
        let (est, time_s) = timed(timing, || estimate_precision(&truth.sigma, &cfg, 0));
        let est = est?;
        let report = compare(&est.omega_hat, &truth.omega, &[1e-4, 1e-8])?;
        rows.push(Case1Row {
            solver: solver.label(),
            nnz_1e8: est.omega_hat.count_above(1e-8),
            nnz_1e4: est.omega_hat.count_above(1e-4),
            time_s,
            relative_frobenius: report.relative_frobenius,
            failures: est.failures(),
        });
    }
    if let Some(out) = out {
        let mut w = open_csv(out, "case1.csv", &format!("case1 p={p} lambda={lambda:e}"))?;
        for row in &rows {
            w.serialize(row).map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Case2Options {
    pub gamma_preset: bool,
    /// Post-hoc zeroing level, also the TP/TN cut.
    pub threshold: f64,
    pub admm_tol: f64,
    pub timing: Timing,
}

impl Default for Case2Options {
    fn default() -> Self {
        Self {
            gamma_preset: false,
            threshold: 0.05,
            admm_tol: 1e-6,
            timing: Timing::Measured,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl From<&RunningStat> for MeanSe {
    fn from(s: &RunningStat) -> Self {
        Self {
            mean: s.mean(),
            se: s.se(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub solver: String,
    pub replicates: usize,
    pub frobenius: MeanSe,
    pub matrix_l1: MeanSe,
    pub operator: MeanSe,
    pub elem_inf: MeanSe,
    pub tp_pct: MeanSe,
    pub tn_pct: MeanSe,
    pub time_s: f64,
    /// Column solves that did not meet their stopping test, summed.
    pub failures: usize,
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    frobenius: RunningStat,
    matrix_l1: RunningStat,
    operator: RunningStat,
    elem_inf: RunningStat,
    tp: RunningStat,
    tn: RunningStat,
    time: RunningStat,
    failures: usize,
}

impl Accumulator {
    fn push(&mut self, r: &MetricsReport, failures: usize) {
        self.frobenius.push(r.frobenius);
        self.matrix_l1.push(r.matrix_l1);
        self.operator.push(r.operator);
        self.elem_inf.push(r.elem_inf);
        self.tp.push(r.tp_pct);
        self.tn.push(r.tn_pct);
        self.time.push(r.wall_time_s);
        self.failures += failures;
    }

    fn row(&self, solver: String) -> AggregateRow {
        AggregateRow {
            solver,
            replicates: self.frobenius.count(),
            frobenius: (&self.frobenius).into(),
            matrix_l1: (&self.matrix_l1).into(),
            operator: (&self.operator).into(),
            elem_inf: (&self.elem_inf).into(),
            tp_pct: (&self.tp).into(),
            tn_pct: (&self.tn).into(),
            time_s: self.time.mean(),
            failures: self.failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case2Table {
    pub rows: Vec<AggregateRow>,
    /// Draws discarded because the sparse pattern was degenerate.
    pub redraws: usize,
}

struct Replicate {
    reports: Vec<(MetricsReport, usize)>,
    redrawn: bool,
}

fn run_replicate(
    p: usize,
    n: usize,
    c_lambda: f64,
    seed: u64,
    rep: u64,
    solvers: &[SolverKind],
    opts: &Case2Options,
) -> Result<Replicate> {
    let truth_seed = derive_seed(seed, 2 * rep);
    let (truth, used) = gen_case2_redraw(p, truth_seed)?;
    let data = sample_gaussian(&truth.sigma, n, derive_seed(seed, 2 * rep + 1))?;
    let sigma_n = sample_covariance(&data)?;
    let mut reports = Vec::with_capacity(solvers.len());
    for &solver in solvers {
        let solver = resolve_solver(solver, &truth);
        let mut cfg = EstimatorConfig::new(LambdaRule::ScaledRoot { c: c_lambda }, solver)
            .with_threshold(opts.threshold);
        cfg.admm_tol = opts.admm_tol;
        if opts.gamma_preset {
            cfg = cfg.with_gamma_preset(p, n);
        }
        let (est, secs) = timed(opts.timing, || estimate_precision(&sigma_n, &cfg, n));
        let est = est?;
        let mut report = compare(&est.omega_hat, &truth.omega, &[opts.threshold])?;
        report.wall_time_s = secs;
        reports.push((report, est.failures()));
    }
    Ok(Replicate {
        reports,
        redrawn: used != truth_seed,
    })
}

fn run_replicates(
    p: usize,
    n: usize,
    c_lambda: f64,
    replicates: usize,
    seed: u64,
    solvers: &[SolverKind],
    opts: &Case2Options,
) -> Result<Case2Table> {
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    if replicates == 0 || solvers.is_empty() {
        return Err(Error::InvalidConfig("need replicates >= 1 and at least one solver".into()));
    }
    let results: Vec<Result<Replicate>> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| run_replicate(p, n, c_lambda, seed, rep, solvers, opts))
        .collect();
    let mut acc = vec![Accumulator::default(); solvers.len()];
    let mut redraws = 0;
    for res in results {
        let rep = res?;
        redraws += rep.redrawn as usize;
        for (a, (report, failures)) in acc.iter_mut().zip(&rep.reports) {
            a.push(report, *failures);
        }
    }
    let rows = acc
        .iter()
        .zip(solvers)
        .map(|(a, s)| a.row(s.label()))
        .collect();
    Ok(Case2Table { rows, redraws })
}

/// Replicated sparse-precision runs on sampled covariances.
#[allow(clippy::too_many_arguments)]
pub fn run_case2(
    p: usize,
    n: usize,
    c_lambda: f64,
    replicates: usize,
    seed: u64,
    solvers: &[SolverKind],
    opts: &Case2Options,
    out: Option<&Path>,
) -> Result<Case2Table> {
    let table = run_replicates(p, n, c_lambda, replicates, seed, solvers, opts)?;
    if let Some(out) = out {
        let comment = format!(
            "case2 p={p} n={n} c_lambda={c_lambda} replicates={replicates} seed={seed} gamma_preset={} threshold={} redraws={}; {SE_NOTE}",
            opts.gamma_preset, opts.threshold, table.redraws
        );
        let mut w = open_csv(out, "case2_losses.csv", &comment)?;
        w.write_record([
            "solver", "replicates", "frobenius_mean", "frobenius_se", "matrix_l1_mean", "matrix_l1_se",
            "operator_mean", "operator_se", "elem_inf_mean", "elem_inf_se", "time_s", "failures",
        ])
        .map_err(csv_err)?;
        for r in &table.rows {
            w.write_record([
                r.solver.clone(),
                r.replicates.to_string(),
                r.frobenius.mean.to_string(),
                r.frobenius.se.to_string(),
                r.matrix_l1.mean.to_string(),
                r.matrix_l1.se.to_string(),
                r.operator.mean.to_string(),
                r.operator.se.to_string(),
                r.elem_inf.mean.to_string(),
                r.elem_inf.se.to_string(),
                r.time_s.to_string(),
                r.failures.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        let mut w = open_csv(out, "case2_recovery.csv", &comment)?;
        w.write_record(["solver", "tp_pct_mean", "tp_pct_se", "tn_pct_mean", "tn_pct_se"])
            .map_err(csv_err)?;
        for r in &table.rows {
            w.write_record([
                r.solver.clone(),
                r.tp_pct.mean.to_string(),
                r.tp_pct.se.to_string(),
                r.tn_pct.mean.to_string(),
                r.tn_pct.se.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub elem_inf: MeanSe,
    pub operator: MeanSe,
    pub frobenius: MeanSe,
}

/// GISS losses as the sample size grows.
pub fn run_convergence_sweep(
    p: usize,
    n_list: &[usize],
    c_lambda: f64,
    replicates: usize,
    seed: u64,
    opts: &Case2Options,
    out: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("n_list must be non-empty and strictly ascending".into()));
    }
    let solvers = [SolverKind::Giss { rho: 1.0 }];
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let t = run_replicates(p, n, c_lambda, replicates, seed, &solvers, opts)?;
        let r = &t.rows[0];
        rows.push(SweepRow {
            n,
            elem_inf: r.elem_inf,
            operator: r.operator,
            frobenius: r.frobenius,
        });
    }
    if let Some(out) = out {
        let comment = format!("sweep p={p} c_lambda={c_lambda} replicates={replicates} seed={seed}; {SE_NOTE}");
        let mut w = open_csv(out, "sweep.csv", &comment)?;
        w.write_record([
            "n", "elem_inf_mean", "elem_inf_se", "operator_mean", "operator_se", "frobenius_mean", "frobenius_se",
        ])
        .map_err(csv_err)?;
        for r in &rows {
            w.write_record([
                r.n.to_string(),
                r.elem_inf.mean.to_string(),
                r.elem_inf.se.to_string(),
                r.operator.mean.to_string(),
                r.operator.se.to_string(),
                r.frobenius.mean.to_string(),
                r.frobenius.se.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(rows)
}
