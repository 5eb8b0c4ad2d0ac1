use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mccgr::evaluation::{self, EvalError, DEFAULT_RESTARTS};
use mccgr::factorization::{
    self, initial_factors, SolveError, SolverConfig, Variant, DEFAULT_ALPHA, DEFAULT_EPSILON,
    DEFAULT_MAX_ITER, DEFAULT_THETA, DEFAULT_TOL,
};
use mccgr::graph::{build_knn_affinity, KnnMode, DEFAULT_KNN};
use mccgr::harness::{self, ExperimentSpec, HarnessError, NoiseKind, SynthSpec};
use mccgr::matrix::{self, MatrixError};

#[derive(Parser)]
#[command(name = "mccgr", version, about = "Correntropy graph-regularized NMF and clustering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorize a non-negative features × samples matrix.
    Factorize(FactorizeArgs),
    /// Cluster the columns of a coefficient matrix and score them.
    Eval(EvalArgs),
    /// Build a k-nearest-neighbour affinity matrix over the columns.
    Graph(GraphArgs),
    /// Run a full experiment described by a JSON spec.
    Experiment(ExperimentArgs),
    /// Generate a planted-cluster dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct FactorizeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Labels for an accuracy/NMI summary of the result.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = Variant::Mccgr)]
    variant: Variant,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = DEFAULT_KNN)]
    knn: usize,
    #[arg(long, default_value_t = KnnMode::Mutual)]
    knn_mode: KnnMode,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_h: Option<PathBuf>,
    #[arg(long)]
    out_w: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    w: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    /// Report destination; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_KNN)]
    knn: usize,
    #[arg(long, default_value_t = KnnMode::Mutual)]
    knn_mode: KnnMode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the spec's output_dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    per_class: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = NoiseKind::Gaussian)]
    noise: NoiseKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    out_labels: PathBuf,
}

/// Failure classes, each with its own exit status.
enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<MatrixError> for Failure {
    fn from(e: MatrixError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<mccgr::graph::GraphError> for Failure {
    fn from(e: mccgr::graph::GraphError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::ClusterCount { .. } | EvalError::NoRestarts => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Numerical { .. } | SolveError::KlUndefined { .. } => Failure::Numerical(e.to_string()),
            SolveError::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Solve(s) => s.into(),
            e if e.is_numerical() => Failure::Numerical(e.to_string()),
            e => Failure::Data(e.to_string()),
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn factorize(args: FactorizeArgs) -> Result<(), Failure> {
    let ds = matrix::load_dataset(&args.input, args.labels.as_deref())?;
    let x = &ds.matrix;
    let cfg = SolverConfig {
        variant: args.variant,
        k: args.k,
        alpha: args.alpha,
        theta: args.theta,
        max_iter: args.max_iter,
        tol: args.tol,
        seed: args.seed,
        epsilon: DEFAULT_EPSILON,
    };
    cfg.validate()?;
    let graph = if cfg.effective_alpha() > 0.0 {
        Some(build_knn_affinity(x, args.knn, args.knn_mode)?)
    } else {
        None
    };
    let (h0, w0) = initial_factors(x.rows(), cfg.k, x.cols(), cfg.seed);
    let f = factorization::solve(x, graph.as_ref(), &cfg, h0, w0)?;
    log::info!(
        "{} finished after {} iterations (converged: {})",
        cfg.variant,
        f.iterations_run,
        f.converged
    );
    if let Some(p) = &args.out_h {
        matrix::save_csv(&f.h, p)?;
    }
    if let Some(p) = &args.out_w {
        matrix::save_csv(&f.w, p)?;
    }
    if let Some(p) = &args.trace {
        write_text(p, &harness::render_trace(&f.trace))?;
    }
    let mut summary = serde_json::json!({
        "variant": cfg.variant,
        "iterations": f.iterations_run,
        "converged": f.converged,
        "objective": f.trace.last(),
    });
    if let Some(labels) = &ds.labels {
        let report = evaluation::evaluate(&f.w, labels, cfg.k, cfg.seed, DEFAULT_RESTARTS)?;
        summary["accuracy"] = report.accuracy.into();
        summary["nmi"] = report.nmi.into();
    }
    println!("{summary}");
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let w = matrix::load_csv(&args.w)?;
    let labels = matrix::load_labels(&args.labels)?;
    let report = evaluation::evaluate(&w, &labels, args.k, args.seed, args.restarts)?;
    let json = serde_json::to_string_pretty(&report).expect("plain data serializes");
    match &args.out {
        Some(p) => write_text(p, &json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn graph(args: GraphArgs) -> Result<(), Failure> {
    let x = matrix::load_csv(&args.input)?;
    let g = build_knn_affinity(&x, args.knn, args.knn_mode)?;
    matrix::save_csv(g.affinity(), &args.out)?;
    log::info!("{} undirected edges over {} samples", g.edge_count(), g.n());
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let spec = ExperimentSpec::from_file(&args.spec)?;
    let out_dir = args
        .out_dir
        .or_else(|| spec.output_dir.clone())
        .ok_or_else(|| Failure::Usage("no output directory: pass --out-dir or set output_dir".into()))?;
    spec.validate()?;
    let ds = matrix::load_dataset(&spec.features, Some(&spec.labels))?;
    let outcome = harness::run_on_dataset(&spec, &ds)?;
    harness::emit_report(&outcome, &out_dir)?;
    if spec.alpha_sweep.is_some() {
        let rows = harness::alpha_sweep(&spec, &ds)?;
        harness::emit_sweep(&rows, &out_dir)?;
    }
    for row in &outcome.report.rows {
        println!(
            "{:>8} k={:<3} accuracy {:.4} ± {:.4}  nmi {:.4} ± {:.4}  ({} runs, {} failed)",
            row.variant,
            row.k,
            row.mean_accuracy,
            row.std_accuracy,
            row.mean_nmi,
            row.std_nmi,
            row.runs,
            row.failures
        );
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), Failure> {
    let ds = harness::synth(&SynthSpec {
        classes: args.classes,
        per_class: args.per_class,
        dim: args.dim,
        noise: args.noise,
        seed: args.seed,
    })
    .map_err(|e| match e {
        HarnessError::Spec(m) => Failure::Usage(m),
        e => e.into(),
    })?;
    matrix::save_csv(&ds.matrix, &args.out)?;
    matrix::save_labels(ds.labels.as_deref().unwrap_or_default(), &args.out_labels)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Factorize(a) => factorize(a),
        Command::Eval(a) => eval(a),
        Command::Graph(a) => graph(a),
        Command::Experiment(a) => experiment(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
