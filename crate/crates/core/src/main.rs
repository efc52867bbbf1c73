use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use giss_clime::bench::{self, Case2Options, Timing};
use giss_clime::clime::{check_lemma1_hypothesis, estimate_precision, gamma_preset, EstimatorConfig, LambdaRule, SolverKind};
use giss_clime::linalg::{io as mio, DenseMatrix};
use giss_clime::metrics::{compare, gaussian_stop_thresholds, incoherence};
use giss_clime::simulation::{gen_case1, gen_case2_redraw, sample_covariance, sample_gaussian, Case, GroundTruth, ScenarioSpec};
use giss_clime::rng::derive_seed;
use giss_clime::Error;

#[derive(Parser, Debug)]
#[command(name = "spm", version, about = "Sparse precision matrix estimation", args_override_self = true)]
struct Cli {
    /// JSON object whose keys override command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic ground truth.
    Gen {
        #[command(subcommand)]
        case: GenCase,
    },
    /// Estimate a precision matrix from a covariance file.
    Estimate(EstimateArgs),
    /// Run a benchmark table.
    Bench {
        #[command(subcommand)]
        table: BenchTable,
    },
    /// Loss norms and recovery rates of an estimate.
    Metrics(MetricsArgs),
    /// Incoherence, stopping thresholds and the Lemma-1 hypothesis.
    Diagnose(DiagnoseArgs),
}

#[derive(Subcommand, Debug)]
enum GenCase {
    Case1 {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Bin)]
        format: Format,
    },
    Case2 {
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also draw this many samples and write data and sample covariance.
        #[arg(long, default_value_t = 0)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Bin)]
        format: Format,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Bin,
    Csv,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Bin => "bin",
            Format::Csv => "csv",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum SolverName {
    Giss,
    Htp,
    Admm,
    AdmmLambda,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Step stretch of GISS.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// HTP sparsity; 0 takes it from the ground truth where one exists.
    #[arg(long, default_value_t = 0)]
    s: usize,
}

fn solver_kind(name: SolverName, args: &SolverArgs) -> SolverKind {
    match name {
        SolverName::Giss => SolverKind::Giss { rho: args.rho },
        SolverName::Htp => SolverKind::Htp { s: args.s },
        SolverName::Admm => SolverKind::AdmmEq,
        SolverName::AdmmLambda => SolverKind::AdmmIneq,
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Sample count behind the covariance; needed by --c-lambda and --gamma-preset.
    #[arg(long, default_value_t = 0)]
    n: usize,
    #[arg(long, conflicts_with = "c_lambda")]
    lambda: Option<f64>,
    #[arg(long)]
    c_lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = SolverName::Giss)]
    solver: SolverName,
    #[command(flatten)]
    solver_args: SolverArgs,
    #[arg(long, default_value_t = 0.0, conflicts_with = "gamma_preset")]
    gamma: f64,
    #[arg(long)]
    gamma_preset: bool,
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    #[arg(long, default_value_t = 1e-6)]
    admm_tol: f64,
    /// Per-column JSON lines.
    #[arg(long)]
    telemetry: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum BenchTable {
    Case1 {
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 1e-9)]
        lambda: f64,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "giss,htp,admm,admm-lambda")]
        solvers: Vec<SolverName>,
        #[command(flatten)]
        solver_args: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
    },
    Case2 {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c_lambda: f64,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "giss,htp,admm,admm-lambda")]
        solvers: Vec<SolverName>,
        #[command(flatten)]
        solver_args: SolverArgs,
        #[arg(long, default_value_t = 0.05)]
        threshold: f64,
        #[arg(long)]
        gamma_preset: bool,
        #[arg(long, default_value_t = 1e-6)]
        admm_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
    },
    Sweep {
        #[arg(long)]
        p: usize,
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<usize>,
        #[arg(long)]
        c_lambda: f64,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// First value drives TP/TN.
    #[arg(long, value_delimiter = ',', default_value = "0.0001,0.00000001")]
    thresholds: Vec<f64>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long, default_value_t = 1)]
    s: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    varsigma: f64,
    /// Together with --sigma0 and --lambda, checks the Lemma-1 hypothesis.
    #[arg(long)]
    omega0: Option<PathBuf>,
    #[arg(long)]
    sigma0: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
}

/// Turns `{"p": 200, "solvers": ["giss", "htp"], "no_timing": true}` into flags.
fn config_flags(path: &Path) -> Result<Vec<String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| format!("bad config JSON: {e}"))?;
    let obj = value.as_object().ok_or("config must be a JSON object")?;
    let mut flags = Vec::new();
    for (key, v) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(true) => flags.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_, _>>()?;
                flags.push(flag);
                flags.push(parts.join(","));
            }
            other => {
                flags.push(flag);
                flags.push(scalar(other)?);
            }
        }
    }
    Ok(flags)
}

fn scalar(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(format!("unsupported config value {v}")),
    }
}

enum Failure {
    Usage(String),
    Numerical(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::Io(_) | Error::Format(_) => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn print_json(v: &Value) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(|e| Failure::Usage(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn write_truth(truth: &GroundTruth, spec: &ScenarioSpec, out: &Path, format: Format) -> Result<(), Failure> {
    fs::create_dir_all(out)?;
    mio::save(&truth.sigma, &out.join(format!("sigma.{}", format.ext())))?;
    mio::save(&truth.omega, &out.join(format!("omega.{}", format.ext())))?;
    fs::write(out.join("spec.json"), serde_json::to_string_pretty(spec).unwrap_or_default())?;
    Ok(())
}

fn run_gen(case: GenCase) -> Result<(), Failure> {
    match case {
        GenCase::Case1 { p, out, format } => {
            let spec = ScenarioSpec { case: Case::Case1, p, n: 0, seed: 0, replicate: 0 };
            spec.validate()?;
            write_truth(&gen_case1(p)?, &spec, &out, format)
        }
        GenCase::Case2 { p, seed, n, out, format } => {
            let (truth, used) = gen_case2_redraw(p, seed)?;
            let spec = ScenarioSpec { case: Case::Case2, p, n: n.max(1), seed: used, replicate: 0 };
            spec.validate()?;
            write_truth(&truth, &spec, &out, format)?;
            if n > 0 {
                let data = sample_gaussian(&truth.sigma, n, derive_seed(used, 1))?;
                mio::save(&data, &out.join(format!("data.{}", format.ext())))?;
                if n >= 2 {
                    mio::save(&sample_covariance(&data)?, &out.join(format!("sample_cov.{}", format.ext())))?;
                }
            }
            Ok(())
        }
    }
}

fn run_estimate(a: EstimateArgs) -> Result<(), Failure> {
    let sigma = mio::load(&a.sigma)?;
    let rule = match (a.lambda, a.c_lambda) {
        (Some(value), _) => LambdaRule::Fixed { value },
        (None, Some(c)) => LambdaRule::ScaledRoot { c },
        (None, None) => return Err(Failure::Usage("one of --lambda or --c-lambda is required".into())),
    };
    if a.solver == SolverName::Htp && a.solver_args.s == 0 {
        return Err(Failure::Usage("htp needs --s without a ground truth".into()));
    }
    let mut cfg = EstimatorConfig::new(rule, solver_kind(a.solver, &a.solver_args)).with_threshold(a.threshold);
    cfg.gamma = a.gamma;
    cfg.admm_tol = a.admm_tol;
    if a.gamma_preset {
        if a.n == 0 {
            return Err(Failure::Usage("--gamma-preset needs --n".into()));
        }
        cfg.gamma = gamma_preset(sigma.rows(), a.n);
    }
    let est = bench::with_pool(|| estimate_precision(&sigma, &cfg, a.n))??;
    mio::save(&est.omega_hat, &a.out)?;
    if let Some(path) = a.telemetry {
        est.write_telemetry(io::BufWriter::new(fs::File::create(path)?))?;
    }
    print_json(&json!({
        "lambda": est.lambda_used,
        "gamma": est.gamma_used,
        "nnz": est.omega_hat.count_above(0.0),
        "failures": est.failures(),
        "iterations": est.total_iterations(),
    }))
}

fn solvers_of(names: &[SolverName], args: &SolverArgs) -> Vec<SolverKind> {
    names.iter().map(|n| solver_kind(*n, args)).collect()
}

fn write_csv_stdout<T: serde::Serialize>(rows: &[T]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn run_bench(table: BenchTable) -> Result<(), Failure> {
    match table {
        BenchTable::Case1 { p, lambda, solvers, solver_args, out, no_timing } => {
            let timing = if no_timing { Timing::Omitted } else { Timing::Measured };
            let solvers = solvers_of(&solvers, &solver_args);
            let rows = bench::with_pool(|| bench::run_case1(p, lambda, &solvers, timing, out.as_deref()))??;
            write_csv_stdout(&rows)
        }
        BenchTable::Case2 {
            p, n, c_lambda, replicates, seed, solvers, solver_args, threshold, gamma_preset, admm_tol, out, no_timing,
        } => {
            let opts = Case2Options {
                gamma_preset,
                threshold,
                admm_tol,
                timing: if no_timing { Timing::Omitted } else { Timing::Measured },
            };
            let solvers = solvers_of(&solvers, &solver_args);
            let table = bench::with_pool(|| {
                bench::run_case2(p, n, c_lambda, replicates, seed, &solvers, &opts, out.as_deref())
            })??;
            print_json(&serde_json::to_value(&table).map_err(|e| Failure::Usage(e.to_string()))?)
        }
        BenchTable::Sweep { p, n_list, c_lambda, replicates, seed, threshold, out } => {
            let opts = Case2Options { threshold, ..Default::default() };
            let rows = bench::with_pool(|| {
                bench::run_convergence_sweep(p, &n_list, c_lambda, replicates, seed, &opts, out.as_deref())
            })??;
            print_json(&serde_json::to_value(&rows).map_err(|e| Failure::Usage(e.to_string()))?)
        }
    }
}

fn run_metrics(a: MetricsArgs) -> Result<(), Failure> {
    let est = mio::load(&a.estimate)?;
    let truth = mio::load(&a.truth)?;
    let report = compare(&est, &truth, &a.thresholds)?;
    print_json(&serde_json::to_value(&report).map_err(|e| Failure::Usage(e.to_string()))?)
}

fn run_diagnose(a: DiagnoseArgs) -> Result<(), Failure> {
    let sigma: DenseMatrix = mio::load(&a.sigma)?;
    let inc = incoherence(&sigma, a.s)?;
    let stops = gaussian_stop_thresholds(&sigma, a.epsilon, a.varsigma, a.s)?;
    let lemma = match (a.omega0, a.sigma0, a.lambda) {
        (Some(o), Some(s0), Some(lambda)) => {
            let d = check_lemma1_hypothesis(&mio::load(&o)?, &sigma, &mio::load(&s0)?, a.gamma, lambda)?;
            Some(d)
        }
        (None, None, None) => None,
        _ => return Err(Failure::Usage("--omega0, --sigma0 and --lambda go together".into())),
    };
    print_json(&json!({
        "incoherence": inc,
        "stop_thresholds": stops,
        "lemma1": lemma,
    }))
}

fn config_path(argv: &[String]) -> Option<PathBuf> {
    argv.iter().enumerate().find_map(|(i, a)| {
        if let Some(v) = a.strip_prefix("--config=") {
            Some(PathBuf::from(v))
        } else if a == "--config" {
            argv.get(i + 1).map(PathBuf::from)
        } else {
            None
        }
    })
}

fn parse() -> Result<Cli, ExitCode> {
    let mut argv: Vec<String> = std::env::args().collect();
    if let Some(path) = config_path(&argv) {
        let extra = config_flags(&path).map_err(|msg| {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        })?;
        argv.extend(extra);
    }
    Cli::try_parse_from(&argv).map_err(report_clap)
}

fn report_clap(e: clap::Error) -> ExitCode {
    let code = if e.use_stderr() { 1 } else { 0 };
    let _ = e.print();
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match parse() {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    let result = match cli.command {
        Command::Gen { case } => run_gen(case),
        Command::Estimate(a) => run_estimate(a),
        Command::Bench { table } => run_bench(table),
        Command::Metrics(a) => run_metrics(a),
        Command::Diagnose(a) => run_diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(2)
        }
    }
}
