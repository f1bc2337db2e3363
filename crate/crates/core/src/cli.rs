//! The `nysadmm` command line: `lasso`, `logistic`, `svm` and `bench`.
//!
//! Exit codes: 0 when the solver converged, 2 when it stopped at the
//! iteration limit, 1 on any error (including usage errors).

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::admm::{solve, AdmmConfig, SolveReport, StoppingRule, ToleranceSchedule};
use crate::error::{Error, Result};
use crate::io::{read_csv, read_libsvm, DataFormat, Dataset};
use crate::linops::{kernel_matrix, random_features, DenseMatrix, DenseOperator, KernelConfig, Vector};
use crate::nystrom::{rand_nystrom_approx, SketchConfig};
use crate::pcg::{conjugate_gradient, nystrom_pcg, PcgConfig};
use crate::precond::build_preconditioner;
use crate::problems::{
    elastic_net_spec, logistic_spec, svm_spec, ElasticNetProblem, LogisticProblem, SvmModel, SvmProblem,
};
use crate::rng;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;

const THREADS_ENV: &str = "NYSADMM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "nysadmm", version, about = "Nyström-preconditioned inexact ADMM solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lasso or elastic net (add --ridge).
    Lasso(RunArgs),
    /// ℓ1-regularized logistic regression.
    Logistic(RunArgs),
    /// Dual kernel SVM with an RBF kernel.
    Svm(RunArgs),
    /// Compare Nyström PCG against plain CG on a synthetic ill-conditioned spectrum.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ScheduleArg {
    Geomean,
    Power,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    /// Defaults to csv for `.csv` files and libsvm otherwise.
    #[arg(long, value_enum)]
    format: Option<DataFormat>,
    /// CSV column holding the label (0-based).
    #[arg(long, default_value_t = 0)]
    label_column: usize,
    /// Override the libsvm feature count.
    #[arg(long)]
    num_features: Option<usize>,
    /// ℓ1 weight (lasso, logistic). Default 1.
    #[arg(long)]
    gamma: Option<f64>,
    /// Ridge weight for the elastic net (lasso only).
    #[arg(long)]
    ridge: Option<f64>,
    /// Misclassification penalty (svm only). Default 1.
    #[arg(long)]
    svm_c: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 50)]
    sketch_size: usize,
    #[arg(long)]
    adaptive: bool,
    #[arg(long)]
    adaptive_tol: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    tol_abs: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol_rel: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the run result as JSON here (stdout otherwise).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Map features through this many random Fourier features first.
    #[arg(long)]
    random_features: Option<usize>,
    /// RBF bandwidth for random features and the SVM kernel. Default 1.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, value_enum)]
    schedule: Option<ScheduleArg>,
    /// Exponent of the power schedule. Default 2.
    #[arg(long)]
    beta: Option<f64>,
    /// Stop on max relative coefficient change instead of residuals (logistic only).
    #[arg(long)]
    stop_relative_change: Option<f64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 300)]
    dim: usize,
    /// Largest eigenvalue divided by rho.
    #[arg(long, default_value_t = 1e4)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 50)]
    sketch_size: usize,
    /// Residual tolerance relative to the right-hand side norm.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ProblemKind {
    Lasso,
    Logistic,
    Svm,
}

impl ProblemKind {
    fn name(self) -> &'static str {
        match self {
            ProblemKind::Lasso => "lasso",
            ProblemKind::Logistic => "logistic",
            ProblemKind::Svm => "svm",
        }
    }
}

/// Echo of the problem-side inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemEcho {
    pub data: String,
    pub format: DataFormat,
    pub rows: usize,
    pub cols: usize,
    pub gamma: Option<f64>,
    pub ridge: Option<f64>,
    pub svm_c: Option<f64>,
    pub random_features: Option<usize>,
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub problem: ProblemEcho,
    pub admm: AdmmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmSummary {
    pub bias: f64,
    pub support_vectors: usize,
    pub training_accuracy: f64,
}

/// The JSON document written by `lasso`, `logistic` and `svm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub problem: String,
    pub converged: bool,
    pub solution: Vec<f64>,
    pub objective: f64,
    pub kkt: Option<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub pcg_iterations: Vec<usize>,
    pub primal_residual_history: Vec<f64>,
    pub dual_residual_history: Vec<f64>,
    pub subproblem_tol_history: Vec<f64>,
    pub total_matvecs: usize,
    pub sketch_matvecs: usize,
    pub sketch_size_used: usize,
    pub empirical_condition_number: f64,
    pub wall_time_ms: f64,
    pub seed: u64,
    pub label_mapping: Option<String>,
    pub svm: Option<SvmSummary>,
    pub config: ConfigEcho,
}

impl RunResult {
    fn from_report(kind: ProblemKind, report: SolveReport, config: ConfigEcho, label_mapping: Option<String>) -> Self {
        let state = report.state;
        Self {
            problem: kind.name().to_string(),
            converged: report.converged,
            solution: report.solution.iter().copied().collect(),
            objective: report.objective,
            kkt: report.kkt,
            primal_residual: report.primal_residual,
            dual_residual: report.dual_residual,
            iterations: report.iterations,
            pcg_iterations: state.pcg_iteration_counts,
            primal_residual_history: state.primal_residual_history,
            dual_residual_history: state.dual_residual_history,
            subproblem_tol_history: state.subproblem_tol_history,
            total_matvecs: report.total_matvecs,
            sketch_matvecs: report.sketch_matvecs,
            sketch_size_used: report.sketch_size_used,
            empirical_condition_number: report.empirical_condition_number,
            wall_time_ms: report.wall_time_ms,
            seed: config.admm.seed,
            label_mapping,
            svm: None,
            config,
        }
    }
}

/// The JSON document written by `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub dim: usize,
    pub rho: f64,
    pub sketch_size: usize,
    pub seed: u64,
    pub condition_number: f64,
    pub empirical_condition_number: f64,
    pub tol: f64,
    pub pcg_iterations: usize,
    pub pcg_converged: bool,
    pub cg_iterations: usize,
    pub cg_converged: bool,
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_CONVERGED,
                _ => EXIT_ERROR,
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    // A pool may already exist when embedded; the cap is best effort then.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    configure_threads()?;
    match cli.command {
        Command::Lasso(args) => run_problem(ProblemKind::Lasso, args),
        Command::Logistic(args) => run_problem(ProblemKind::Logistic, args),
        Command::Svm(args) => run_problem(ProblemKind::Svm, args),
        Command::Bench(args) => run_bench(args),
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn validate_combination(kind: ProblemKind, args: &RunArgs) -> Result<()> {
    let name = kind.name();
    let forbid = |present: bool, flag: &str| -> Result<()> {
        if present {
            Err(usage(format!("{flag} cannot be used with `{name}`")))
        } else {
            Ok(())
        }
    };
    match kind {
        ProblemKind::Lasso => {
            forbid(args.svm_c.is_some(), "--svm-c")?;
            forbid(args.stop_relative_change.is_some(), "--stop-relative-change")?;
        }
        ProblemKind::Logistic => {
            forbid(args.svm_c.is_some(), "--svm-c")?;
            forbid(args.ridge.is_some(), "--ridge")?;
        }
        ProblemKind::Svm => {
            forbid(args.gamma.is_some(), "--gamma")?;
            forbid(args.ridge.is_some(), "--ridge")?;
            forbid(args.stop_relative_change.is_some(), "--stop-relative-change")?;
        }
    }
    if kind != ProblemKind::Svm && args.bandwidth.is_some() && args.random_features.is_none() {
        return Err(usage("--bandwidth requires --random-features"));
    }
    if args.adaptive_tol.is_some() && !args.adaptive {
        return Err(usage("--adaptive-tol requires --adaptive"));
    }
    if args.beta.is_some() && args.schedule != Some(ScheduleArg::Power) {
        return Err(usage("--beta requires --schedule power"));
    }
    if args.num_features.is_some() && resolve_format(args) != DataFormat::Libsvm {
        return Err(usage("--num-features only applies to libsvm input"));
    }
    Ok(())
}

fn resolve_format(args: &RunArgs) -> DataFormat {
    args.format.unwrap_or_else(|| {
        let is_csv = args
            .data
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            DataFormat::Csv
        } else {
            DataFormat::Libsvm
        }
    })
}

fn admm_config(args: &RunArgs) -> AdmmConfig {
    let defaults = AdmmConfig::default();
    AdmmConfig {
        rho: args.rho,
        eps_abs: args.tol_abs,
        eps_rel: args.tol_rel,
        max_admm_iters: args.max_iters,
        sketch_size: args.sketch_size,
        adaptive: args.adaptive,
        adaptive_tol: args.adaptive_tol.unwrap_or(defaults.adaptive_tol),
        seed: args.seed,
        tolerance_schedule: match args.schedule {
            Some(ScheduleArg::Power) => ToleranceSchedule::PowerDecay {
                beta: args.beta.unwrap_or(2.0),
            },
            _ => ToleranceSchedule::GeometricMean,
        },
        stopping: match args.stop_relative_change {
            Some(tol) => StoppingRule::RelativeChange { tol },
            None => StoppingRule::Residuals,
        },
        ..defaults
    }
}

fn label_set(labels: &Vector, allowed: [f64; 2]) -> bool {
    labels.iter().all(|v| allowed.contains(v))
}

/// Maps labels into the convention each problem expects.
fn map_labels(kind: ProblemKind, labels: &Vector) -> Result<(Vector, Option<String>)> {
    match kind {
        ProblemKind::Lasso => Ok((labels.clone(), None)),
        ProblemKind::Logistic => {
            if label_set(labels, [0.0, 1.0]) {
                Ok((labels.clone(), None))
            } else if label_set(labels, [-1.0, 1.0]) {
                Ok((labels.map(|v| if v > 0.0 { 1.0 } else { 0.0 }), Some("{-1,+1}->{0,1}".into())))
            } else {
                Err(usage("logistic labels must be in {0,1} or {-1,+1}"))
            }
        }
        ProblemKind::Svm => {
            if label_set(labels, [-1.0, 1.0]) {
                Ok((labels.clone(), None))
            } else if label_set(labels, [0.0, 1.0]) {
                Ok((labels.map(|v| if v > 0.0 { 1.0 } else { -1.0 }), Some("{0,1}->{-1,+1}".into())))
            } else {
                Err(usage("svm labels must be in {-1,+1} or {0,1}"))
            }
        }
    }
}

fn load(args: &RunArgs) -> Result<Dataset> {
    if !args.data.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("data file {} not found", args.data.display()),
        )));
    }
    match resolve_format(args) {
        DataFormat::Libsvm => read_libsvm(&args.data, args.num_features),
        DataFormat::Csv => read_csv(&args.data, args.label_column),
    }
}

fn run_problem(kind: ProblemKind, args: RunArgs) -> Result<i32> {
    validate_combination(kind, &args)?;
    let data = load(&args)?;
    let (labels, label_mapping) = map_labels(kind, &data.labels)?;
    let bandwidth = args.bandwidth.unwrap_or(1.0);
    let kernel = KernelConfig::rbf(bandwidth)?;
    let features = match args.random_features {
        Some(dim) => random_features(&data.features, dim, &kernel, args.seed)?,
        None => data.features.clone(),
    };
    let cfg = admm_config(&args);
    let echo = ProblemEcho {
        data: args.data.display().to_string(),
        format: data.source_format,
        rows: features.rows(),
        cols: features.cols(),
        gamma: (kind != ProblemKind::Svm).then(|| args.gamma.unwrap_or(1.0)),
        ridge: args.ridge,
        svm_c: (kind == ProblemKind::Svm).then(|| args.svm_c.unwrap_or(1.0)),
        random_features: args.random_features,
        bandwidth: (kind == ProblemKind::Svm || args.random_features.is_some()).then_some(bandwidth),
    };

    let mut svm_summary = None;
    let report = match kind {
        ProblemKind::Lasso => {
            let p = ElasticNetProblem::new(features, labels, echo.gamma.unwrap_or(1.0), args.ridge.unwrap_or(0.0))?;
            solve(&elastic_net_spec(p)?, &cfg, None)?
        }
        ProblemKind::Logistic => {
            let p = LogisticProblem::new(features, labels, echo.gamma.unwrap_or(1.0))?;
            solve(&logistic_spec(p), &cfg, None)?
        }
        ProblemKind::Svm => {
            let k = if args.random_features.is_some() {
                let phi = features.as_matrix();
                DenseMatrix::from_matrix(phi * phi.transpose())?
            } else {
                kernel_matrix(&features, &kernel)?
            };
            let p = SvmProblem::new(k, labels, echo.svm_c.unwrap_or(1.0))?;
            let report = solve(&svm_spec(p.clone())?, &cfg, None)?;
            let model = SvmModel::recover(&p, &report.solution);
            svm_summary = Some(SvmSummary {
                bias: model.bias,
                support_vectors: model.support_vectors,
                training_accuracy: model.training_accuracy(&p, &report.solution),
            });
            report
        }
    };

    let mut result = RunResult::from_report(kind, report, ConfigEcho { problem: echo, admm: cfg }, label_mapping);
    result.svm = svm_summary;
    eprintln!(
        "{}: {} after {} iterations, objective {:.6e}{}",
        kind.name(),
        if result.converged { "converged" } else { "stopped at iteration limit" },
        result.iterations,
        result.objective,
        result.kkt.map(|k| format!(", kkt {k:.3e}")).unwrap_or_default(),
    );
    emit_json(&result, args.output.as_deref())?;
    Ok(if result.converged { EXIT_CONVERGED } else { EXIT_MAX_ITERS })
}

fn emit_json<T: Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| usage(format!("serializing result: {e}")))?;
    match output {
        Some(path) => {
            let mut f = File::create(path)?;
            f.write_all(text.as_bytes())?;
            f.write_all(b"\n")?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

/// Synthetic psd matrix `Q diag(λ) Qᵀ` with `λᵢ = κρ / i²`.
pub fn bench_matrix(dim: usize, kappa: f64, rho: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng::seeded(seed);
    let q = rng::gaussian_matrix(&mut r, dim, dim).qr().q();
    let lams = Vector::from_fn(dim, |i, _| kappa * rho / ((i + 1) as f64).powi(2));
    let h = &q * DMatrix::from_diagonal(&lams) * q.transpose();
    (&h + h.transpose()) * 0.5
}

fn run_bench(args: BenchArgs) -> Result<i32> {
    if args.dim == 0 || !(args.kappa > 0.0) || !(args.rho > 0.0) || !(args.tol > 0.0) {
        return Err(usage("bench needs dim ≥ 1 and positive kappa, rho, tol"));
    }
    let h = DenseOperator::new(bench_matrix(args.dim, args.kappa, args.rho, args.seed))?;
    let mut r = rng::seeded(args.seed.wrapping_add(1));
    let rhs = rng::gaussian_vector(&mut r, args.dim);
    let tol = args.tol * rhs.norm();
    let sketch = args.sketch_size.min(args.dim);
    let approx = rand_nystrom_approx(&h, &SketchConfig { sketch_size: sketch, seed: args.seed })?;
    let precond = build_preconditioner(approx, args.rho)?;
    let cfg = PcgConfig {
        tol,
        max_iters: args.max_iters,
        theory_cap: None,
    };
    let x0 = Vector::zeros(args.dim);
    let pcg = nystrom_pcg(&h, args.rho, &rhs, &x0, &precond, &cfg)?;
    let cg = conjugate_gradient(&h, args.rho, &rhs, &x0, &cfg)?;
    let result = BenchResult {
        dim: args.dim,
        rho: args.rho,
        sketch_size: sketch,
        seed: args.seed,
        condition_number: (args.kappa * args.rho + args.rho) / (args.kappa * args.rho / (args.dim as f64).powi(2) + args.rho),
        empirical_condition_number: precond.empirical_condition_number(),
        tol,
        pcg_iterations: pcg.iterations,
        pcg_converged: pcg.converged,
        cg_iterations: cg.iterations,
        cg_converged: cg.converged,
    };
    eprintln!(
        "bench: Nyström PCG {} iterations, CG {} iterations (condition number {:.3e})",
        result.pcg_iterations, result.cg_iterations, result.condition_number
    );
    emit_json(&result, args.output.as_deref())?;
    Ok(EXIT_CONVERGED)
}
