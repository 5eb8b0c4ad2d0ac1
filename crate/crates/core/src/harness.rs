//! Experiment protocol: synthetic datasets, random category sampling,
//! shared initializations across variants, repeated runs, α sweeps, and the
//! CSV/JSON report files.
//!
//! Every random draw is keyed by `base_seed + repeat`, so results do not
//! depend on how the `(k, repeat)` cells are scheduled across threads.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evaluation::{self, EvalError, DEFAULT_RESTARTS};
use crate::factorization::{
    self, initial_factors, SolveError, SolverConfig, Variant, DEFAULT_EPSILON, DEFAULT_MAX_ITER,
    DEFAULT_THETA, DEFAULT_TOL,
};
use crate::graph::{build_knn_affinity, GraphError, KnnMode, DEFAULT_KNN};
use crate::matrix::{self, seeded_rng, DenseMatrix, LabeledDataset, MatrixError};

pub const DEFAULT_REPEATS: usize = 50;
pub const DEFAULT_SWEEP_K: usize = 2;
const CATEGORY_STREAM: u64 = 2;
const SYNTH_STREAM: u64 = 0;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid experiment spec: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("dataset has {available} classes, cannot sample {requested}")]
    TooFewClasses { available: usize, requested: usize },
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("no successful runs to report")]
    NoRecords,
}

impl HarnessError {
    /// True for failures of the numerical iteration itself, as opposed to
    /// bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            HarnessError::Solve(SolveError::Numerical { .. } | SolveError::KlUndefined { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Clipped Gaussian noise on every entry.
    #[default]
    Gaussian,
    /// Gaussian noise plus heavy-tailed corruption on a tenth of the features.
    Heavy,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Heavy => "heavy",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "heavy" => Ok(NoiseKind::Heavy),
            other => Err(format!("unknown noise kind {other:?}")),
        }
    }
}

/// Parameters of the planted-cluster generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub noise: NoiseKind,
    pub seed: u64,
}

/// Standard deviation of the per-entry Gaussian noise.
pub const SYNTH_NOISE_STD: f64 = 0.1;
/// Scale of the heavy-tailed (Student-t, 1 degree of freedom) corruption.
pub const SYNTH_HEAVY_SCALE: f64 = 0.3;
/// Fraction of features corrupted under [`NoiseKind::Heavy`].
pub const SYNTH_HEAVY_FRACTION: f64 = 0.1;

/// Planted non-negative clusters: `x_n = B c_n + noise`, where basis column
/// `c` has weight 1 on its own block of features and weight 0.2·u elsewhere,
/// and sample coefficients put 0.8–1.2 on the sample's class and up to 0.1 on
/// the others. Entries are clipped at zero. Samples are ordered class by
/// class.
pub fn synth(spec: &SynthSpec) -> Result<LabeledDataset> {
    if spec.classes == 0 || spec.per_class == 0 || spec.dim == 0 {
        return Err(HarnessError::Spec(
            "classes, per_class and dim must all be positive".into(),
        ));
    }
    let mut rng = seeded_rng(spec.seed, SYNTH_STREAM);
    let (d, c) = (spec.dim, spec.classes);
    let basis: Vec<f64> = (0..d * c)
        .map(|i| {
            let (row, col) = (i / c, i % c);
            if row % c == col {
                1.0
            } else {
                0.2 * rng.random::<f64>()
            }
        })
        .collect();
    let n = c * spec.per_class;
    let labels: Vec<i64> = (0..n).map(|i| (i / spec.per_class) as i64).collect();
    let noise = Normal::new(0.0, SYNTH_NOISE_STD).expect("valid std");
    let mut data = vec![0.0; d * n];
    for (col, &label) in labels.iter().enumerate() {
        let coeffs: Vec<f64> = (0..c)
            .map(|k| {
                if k as i64 == label {
                    0.8 + 0.4 * rng.random::<f64>()
                } else {
                    0.1 * rng.random::<f64>()
                }
            })
            .collect();
        for row in 0..d {
            let clean: f64 = (0..c).map(|k| basis[row * c + k] * coeffs[k]).sum();
            data[row * n + col] = (clean + noise.sample(&mut rng)).max(0.0);
        }
    }
    if spec.noise == NoiseKind::Heavy {
        let corrupted = ((d as f64 * SYNTH_HEAVY_FRACTION).ceil() as usize).min(d);
        let rows = index::sample(&mut rng, d, corrupted).into_vec();
        let tail = StudentT::new(1.0).expect("valid degrees of freedom");
        for row in rows {
            for col in 0..n {
                let v: f64 = tail.sample(&mut rng);
                data[row * n + col] += SYNTH_HEAVY_SCALE * v.abs();
            }
        }
    }
    let matrix = DenseMatrix::new(d, n, data)?;
    Ok(LabeledDataset::new(matrix, Some(labels))?)
}

/// Picks `k` distinct classes uniformly and returns the indices of all
/// columns carrying one of them, in their original order.
pub fn sample_categories(labels: &[i64], k: usize, seed: u64) -> Result<Vec<usize>> {
    let classes = matrix::distinct_sorted(labels);
    if k == 0 || k > classes.len() {
        return Err(HarnessError::TooFewClasses {
            available: classes.len(),
            requested: k,
        });
    }
    let mut rng = seeded_rng(seed, CATEGORY_STREAM);
    let chosen: BTreeSet<i64> = index::sample(&mut rng, classes.len(), k)
        .into_iter()
        .map(|i| classes[i])
        .collect();
    Ok(labels
        .iter()
        .enumerate()
        .filter(|(_, l)| chosen.contains(l))
        .map(|(i, _)| i)
        .collect())
}

/// One algorithm entry of an experiment; unset fields take the experiment's
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Column name in report tables; defaults to the variant name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl VariantSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            alpha: None,
            theta: None,
            label: None,
        }
    }

    pub fn with_alpha(variant: Variant, alpha: f64) -> Self {
        Self {
            alpha: Some(alpha),
            ..Self::new(variant)
        }
    }

    pub fn id(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.variant.name().to_owned())
    }
}

fn default_repeats() -> usize {
    DEFAULT_REPEATS
}
fn default_knn() -> usize {
    DEFAULT_KNN
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}
fn default_sweep_k() -> usize {
    DEFAULT_SWEEP_K
}
fn default_alpha() -> f64 {
    factorization::DEFAULT_ALPHA
}
fn default_theta() -> f64 {
    DEFAULT_THETA
}

/// Experiment description, read from JSON by the `experiment` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Feature CSV (features × samples).
    pub features: PathBuf,
    /// Single-column label CSV aligned with the feature columns.
    pub labels: PathBuf,
    pub k_range: Vec<usize>,
    pub variants: Vec<VariantSpec>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_sweep: Option<Vec<f64>>,
    #[serde(default = "default_sweep_k")]
    pub sweep_k: usize,
    #[serde(default = "default_knn")]
    pub knn: usize,
    #[serde(default)]
    pub knn_mode: KnnMode,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Spec with the protocol defaults for everything but the data and
    /// algorithm lists.
    pub fn new(features: PathBuf, labels: PathBuf, k_range: Vec<usize>, variants: Vec<VariantSpec>) -> Self {
        Self {
            features,
            labels,
            k_range,
            variants,
            repeats: DEFAULT_REPEATS,
            base_seed: 0,
            alpha_sweep: None,
            sweep_k: DEFAULT_SWEEP_K,
            knn: DEFAULT_KNN,
            knn_mode: KnnMode::default(),
            alpha: factorization::DEFAULT_ALPHA,
            theta: DEFAULT_THETA,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            restarts: DEFAULT_RESTARTS,
            output_dir: None,
        }
    }

    /// Reads a JSON spec. Relative data paths are resolved against the
    /// directory containing the spec file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut spec: ExperimentSpec = serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for p in [&mut spec.features, &mut spec.labels] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = spec.output_dir.as_mut().filter(|o| o.is_relative()) {
            *out = base.join(&*out);
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(HarnessError::Spec("repeats must be at least 1".into()));
        }
        if self.k_range.is_empty() {
            return Err(HarnessError::Spec("k_range is empty".into()));
        }
        if let Some(k) = self.k_range.iter().find(|&&k| k < 2) {
            return Err(HarnessError::Spec(format!(
                "cluster counts must be at least 2, got {k}"
            )));
        }
        if self.variants.is_empty() {
            return Err(HarnessError::Spec("no variants listed".into()));
        }
        let mut ids = BTreeSet::new();
        for v in &self.variants {
            if !ids.insert(v.id()) {
                return Err(HarnessError::Spec(format!(
                    "duplicate variant id {:?}; set distinct labels",
                    v.id()
                )));
            }
        }
        if let Some(sweep) = &self.alpha_sweep {
            if sweep.is_empty() {
                return Err(HarnessError::Spec("alpha_sweep is empty".into()));
            }
            if sweep.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return Err(HarnessError::Spec("alpha_sweep values must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    fn solver_config(&self, v: &VariantSpec, k: usize, seed: u64) -> SolverConfig {
        SolverConfig {
            variant: v.variant,
            k,
            alpha: v.alpha.unwrap_or(self.alpha),
            theta: v.theta.unwrap_or(self.theta),
            max_iter: self.max_iter,
            tol: self.tol,
            seed,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Outcome of one variant on one `(k, repeat)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: String,
    pub k: usize,
    pub repeat: usize,
    pub accuracy: f64,
    pub nmi: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    /// Digest of the shared initial factors of this cell.
    pub init_hash: String,
    /// Set when the run failed; failed runs are left out of aggregates.
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: Vec<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub variant: String,
    pub k: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_nmi: f64,
    pub std_nmi: f64,
    /// Successful runs averaged.
    pub runs: usize,
    pub failures: usize,
}

/// Per-(variant, k) means and sample standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub rows: Vec<AggregateRow>,
}

impl AggregateReport {
    pub fn get(&self, variant: &str, k: usize) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.variant == variant && r.k == k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub report: AggregateReport,
    /// Ordered by k (as listed), repeat, then variant (as listed).
    pub records: Vec<RunRecord>,
    pub k_range: Vec<usize>,
    pub variant_ids: Vec<String>,
}

/// Hex digest identifying a pair of initial factors bit for bit.
pub fn init_hash(h0: &DenseMatrix, w0: &DenseMatrix) -> String {
    let mut hasher = Sha256::new();
    for m in [h0, w0] {
        hasher.update((m.rows() as u64).to_le_bytes());
        hasher.update((m.cols() as u64).to_le_bytes());
        for v in m.view().iter() {
            hasher.update(v.to_bits().to_le_bytes());
        }
    }
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn failed(variant: &VariantSpec, k: usize, repeat: usize, hash: &str, err: String) -> RunRecord {
    log::warn!("{} k={k} repeat={repeat} failed: {err}", variant.id());
    RunRecord {
        variant: variant.id(),
        k,
        repeat,
        accuracy: 0.0,
        nmi: 0.0,
        iterations: 0,
        converged: false,
        final_objective: f64::NAN,
        init_hash: hash.to_owned(),
        error: Some(err),
        trace: Vec::new(),
        wall_time: Duration::ZERO,
    }
}

fn run_cell(spec: &ExperimentSpec, ds: &LabeledDataset, labels: &[i64], k: usize, repeat: usize) -> Result<Vec<RunRecord>> {
    let seed = spec.base_seed.wrapping_add(repeat as u64);
    let columns = sample_categories(labels, k, seed)?;
    let x = ds.matrix.select_columns(&columns)?;
    let truth: Vec<i64> = columns.iter().map(|&c| labels[c]).collect();
    let needs_graph = spec
        .variants
        .iter()
        .any(|v| v.variant.uses_graph() && v.alpha.unwrap_or(spec.alpha) > 0.0);
    let graph = if needs_graph {
        Some(build_knn_affinity(&x, spec.knn, spec.knn_mode))
    } else {
        None
    };
    let (h0, w0) = initial_factors(x.rows(), k, x.cols(), seed);
    let hash = init_hash(&h0, &w0);
    let records = spec
        .variants
        .iter()
        .map(|v| {
            let cfg = spec.solver_config(v, k, seed);
            let g = match (&graph, cfg.effective_alpha() > 0.0) {
                (Some(Ok(g)), true) => Some(g),
                (Some(Err(e)), true) => return failed(v, k, repeat, &hash, e.to_string()),
                _ => None,
            };
            let start = Instant::now();
            let result = factorization::solve(&x, g, &cfg, h0.clone(), w0.clone())
                .map_err(|e| e.to_string())
                .and_then(|f| {
                    let report = evaluation::evaluate(&f.w, &truth, k, seed, spec.restarts).map_err(|e| e.to_string())?;
                    Ok((f, report))
                });
            match result {
                Ok((f, report)) => RunRecord {
                    variant: v.id(),
                    k,
                    repeat,
                    accuracy: report.accuracy,
                    nmi: report.nmi,
                    iterations: f.iterations_run,
                    converged: f.converged,
                    final_objective: f.trace.last().copied().unwrap_or(f64::NAN),
                    init_hash: hash.clone(),
                    error: None,
                    wall_time: start.elapsed(),
                    trace: f.trace,
                },
                Err(e) => failed(v, k, repeat, &hash, e),
            }
        })
        .collect();
    Ok(records)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Aggregates per (variant, k) over successful records, summing in repeat
/// order so the result does not depend on record order.
pub fn aggregate(records: &[RunRecord], k_range: &[usize], variant_ids: &[String]) -> AggregateReport {
    let mut rows = Vec::new();
    for &k in k_range {
        for id in variant_ids {
            let mut cell: Vec<&RunRecord> = records.iter().filter(|r| r.k == k && &r.variant == id).collect();
            cell.sort_by_key(|r| r.repeat);
            let ok: Vec<&RunRecord> = cell.iter().copied().filter(|r| r.succeeded()).collect();
            let acc: Vec<f64> = ok.iter().map(|r| r.accuracy).collect();
            let nmi: Vec<f64> = ok.iter().map(|r| r.nmi).collect();
            let (mean_accuracy, std_accuracy) = mean_std(&acc);
            let (mean_nmi, std_nmi) = mean_std(&nmi);
            rows.push(AggregateRow {
                variant: id.clone(),
                k,
                mean_accuracy,
                std_accuracy,
                mean_nmi,
                std_nmi,
                runs: ok.len(),
                failures: cell.len() - ok.len(),
            });
        }
    }
    AggregateReport { rows }
}

/// Runs every variant on every `(k, repeat)` cell of `spec` over an
/// already-loaded dataset.
pub fn run_on_dataset(spec: &ExperimentSpec, ds: &LabeledDataset) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let labels = ds.labels.as_deref().ok_or(HarnessError::MissingLabels)?;
    if let Some(&k) = spec.k_range.iter().find(|&&k| k > ds.class_ids.len()) {
        return Err(HarnessError::TooFewClasses {
            available: ds.class_ids.len(),
            requested: k,
        });
    }
    let cells: Vec<(usize, usize)> = spec
        .k_range
        .iter()
        .flat_map(|&k| (0..spec.repeats).map(move |r| (k, r)))
        .collect();
    let per_cell: Vec<Vec<RunRecord>> = cells
        .par_iter()
        .map(|&(k, r)| run_cell(spec, ds, labels, k, r))
        .collect::<Result<_>>()?;
    let records: Vec<RunRecord> = per_cell.into_iter().flatten().collect();
    let variant_ids: Vec<String> = spec.variants.iter().map(VariantSpec::id).collect();
    let report = aggregate(&records, &spec.k_range, &variant_ids);
    Ok(ExperimentOutcome {
        report,
        records,
        k_range: spec.k_range.clone(),
        variant_ids,
    })
}

/// Loads the spec's dataset and runs it.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let ds = matrix::load_dataset(&spec.features, Some(&spec.labels))?;
    run_on_dataset(spec, &ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub mean_accuracy: f64,
    pub mean_nmi: f64,
    pub runs: usize,
}

/// Mean MCCGR accuracy at `spec.sweep_k` clusters for every α in
/// `spec.alpha_sweep`, ascending in α. θ comes from the spec's MCCGR entry
/// when there is one.
pub fn alpha_sweep(spec: &ExperimentSpec, ds: &LabeledDataset) -> Result<Vec<SweepRow>> {
    let mut alphas = spec
        .alpha_sweep
        .clone()
        .filter(|a| !a.is_empty())
        .ok_or_else(|| HarnessError::Spec("alpha_sweep is empty".into()))?;
    alphas.sort_by(f64::total_cmp);
    let theta = spec
        .variants
        .iter()
        .find(|v| v.variant == Variant::Mccgr)
        .and_then(|v| v.theta);
    alphas
        .into_iter()
        .map(|alpha| {
            let variant = VariantSpec {
                variant: Variant::Mccgr,
                alpha: Some(alpha),
                theta,
                label: None,
            };
            let sub = ExperimentSpec {
                k_range: vec![spec.sweep_k],
                variants: vec![variant],
                alpha_sweep: None,
                ..spec.clone()
            };
            let out = run_on_dataset(&sub, ds)?;
            let row = &out.report.rows[0];
            Ok(SweepRow {
                alpha,
                mean_accuracy: row.mean_accuracy,
                mean_nmi: row.mean_nmi,
                runs: row.runs,
            })
        })
        .collect()
}

fn fmt_cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

/// Two-column `iteration,objective` CSV of a convergence trace.
pub fn render_trace(trace: &[f64]) -> String {
    let mut out = String::from("iteration,objective\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, v));
    }
    out
}

fn render_table(outcome: &ExperimentOutcome, pick: impl Fn(&AggregateRow) -> f64) -> String {
    let mut out = format!("k,{}\n", outcome.variant_ids.join(","));
    for &k in &outcome.k_range {
        let cells: Vec<String> = outcome
            .variant_ids
            .iter()
            .map(|id| outcome.report.get(id, k).map(&pick).map(fmt_cell).unwrap_or_default())
            .collect();
        out.push_str(&format!("{k},{}\n", cells.join(",")));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct Summary {
    aggregates: Vec<AggregateRow>,
    runs: usize,
    failures: usize,
}

/// Writes `accuracy.csv`, `nmi.csv` (rows k, columns variants), `runs.csv`,
/// `traces/<variant>_k<k>_r<repeat>.csv` and `summary.json` into `dir`.
/// Wall-clock times are logged, not written, so identical specs give
/// identical files.
pub fn emit_report(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    let ok = outcome.records.iter().filter(|r| r.succeeded()).count();
    if ok == 0 {
        return Err(HarnessError::NoRecords);
    }
    let traces = dir.join("traces");
    fs::create_dir_all(&traces).map_err(io_err(&traces))?;
    write(&dir.join("accuracy.csv"), render_table(outcome, |r| r.mean_accuracy))?;
    write(&dir.join("nmi.csv"), render_table(outcome, |r| r.mean_nmi))?;

    let mut runs = String::from(
        "variant,k,repeat,accuracy,nmi,iterations,converged,final_objective,init_hash,error\n",
    );
    for r in &outcome.records {
        runs.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.variant,
            r.k,
            r.repeat,
            r.accuracy,
            r.nmi,
            r.iterations,
            r.converged,
            fmt_cell(r.final_objective),
            r.init_hash,
            r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        ));
        log::info!(
            "{} k={} repeat={} took {:.3}s",
            r.variant,
            r.k,
            r.repeat,
            r.wall_time.as_secs_f64()
        );
        if r.succeeded() {
            write(
                &traces.join(format!("{}_k{}_r{}.csv", r.variant, r.k, r.repeat)),
                render_trace(&r.trace),
            )?;
        }
    }
    write(&dir.join("runs.csv"), runs)?;

    let summary = Summary {
        aggregates: outcome.report.rows.clone(),
        runs: outcome.records.len(),
        failures: outcome.records.len() - ok,
    };
    let json = serde_json::to_string_pretty(&summary).expect("plain data serializes");
    write(&dir.join("summary.json"), json)
}

/// Parses the aggregates back out of a `summary.json`.
pub fn read_summary(path: &Path) -> Result<AggregateReport> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let summary: Summary = serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(AggregateReport {
        rows: summary.aggregates,
    })
}

/// Writes `alpha_sweep.csv` with columns `alpha,mean_accuracy,mean_nmi,runs`.
pub fn emit_sweep(rows: &[SweepRow], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut out = String::from("alpha,mean_accuracy,mean_nmi,runs\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.alpha,
            fmt_cell(r.mean_accuracy),
            fmt_cell(r.mean_nmi),
            r.runs
        ));
    }
    write(&dir.join("alpha_sweep.csv"), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(noise: NoiseKind, seed: u64) -> LabeledDataset {
        synth(&SynthSpec {
            classes: 3,
            per_class: 6,
            dim: 12,
            noise,
            seed,
        })
        .unwrap()
    }

    fn quick_spec(variants: Vec<VariantSpec>) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new("x.csv".into(), "y.csv".into(), vec![2, 3], variants);
        spec.repeats = 3;
        spec.max_iter = 40;
        spec.restarts = 2;
        spec.knn = 3;
        spec
    }

    #[test]
    fn synth_shape_labels_and_determinism() {
        let ds = small(NoiseKind::Gaussian, 4);
        assert_eq!(ds.matrix.shape(), (12, 18));
        assert_eq!(ds.class_ids, vec![0, 1, 2]);
        assert!(ds.matrix.is_nonnegative());
        assert_eq!(ds.labels.as_ref().unwrap()[5..7], [0, 1]);
        assert_eq!(small(NoiseKind::Gaussian, 4), ds);
        assert_ne!(small(NoiseKind::Gaussian, 5).matrix, ds.matrix);
    }

    #[test]
    fn heavy_noise_only_adds_mass() {
        let clean = small(NoiseKind::Gaussian, 9);
        let heavy = small(NoiseKind::Heavy, 9);
        let mut corrupted_rows = BTreeSet::new();
        for r in 0..12 {
            for c in 0..18 {
                let (a, b) = (clean.matrix.get(r, c), heavy.matrix.get(r, c));
                assert!(b >= a);
                if b > a {
                    corrupted_rows.insert(r);
                }
            }
        }
        // ceil(12 / 10) rows.
        assert_eq!(corrupted_rows.len(), 2);
    }

    #[test]
    fn synth_rejects_empty_shapes() {
        let spec = SynthSpec {
            classes: 0,
            per_class: 3,
            dim: 4,
            noise: NoiseKind::Gaussian,
            seed: 0,
        };
        assert!(matches!(synth(&spec), Err(HarnessError::Spec(_))));
    }

    #[test]
    fn category_sampling_takes_whole_classes() {
        let labels = [5, 1, 5, 2, 1, 9, 2, 9];
        for seed in 0..20 {
            let cols = sample_categories(&labels, 2, seed).unwrap();
            let picked: BTreeSet<i64> = cols.iter().map(|&c| labels[c]).collect();
            assert_eq!(picked.len(), 2);
            assert_eq!(cols.len(), 4);
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(sample_categories(&labels, 2, seed).unwrap(), cols);
        }
        assert_eq!(sample_categories(&labels, 4, 0).unwrap().len(), 8);
        assert!(matches!(
            sample_categories(&labels, 5, 0),
            Err(HarnessError::TooFewClasses { available: 4, requested: 5 })
        ));
    }

    #[test]
    fn spec_json_defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.json");
        fs::write(
            &path,
            r#"{"features": "x.csv", "labels": "/abs/y.csv", "k_range": [2],
                "variants": [{"variant": "mccgr", "alpha": 10.0}, {"variant": "l2"}]}"#,
        )
        .unwrap();
        let spec = ExperimentSpec::from_file(&path).unwrap();
        assert_eq!(spec.features, dir.path().join("x.csv"));
        assert_eq!(spec.labels, PathBuf::from("/abs/y.csv"));
        assert_eq!(spec.repeats, DEFAULT_REPEATS);
        assert_eq!(spec.knn, DEFAULT_KNN);
        assert_eq!(spec.knn_mode, KnnMode::Mutual);
        assert_eq!(spec.variants[0], VariantSpec::with_alpha(Variant::Mccgr, 10.0));
        spec.validate().unwrap();

        fs::write(&path, r#"{"features": "x", "labels": "y", "k_range": [2], "variants": [], "bogus": 1}"#).unwrap();
        assert!(matches!(ExperimentSpec::from_file(&path), Err(HarnessError::Json { .. })));
    }

    #[test]
    fn spec_validation() {
        let base = quick_spec(vec![VariantSpec::new(Variant::L2)]);
        base.validate().unwrap();
        let bad = |f: &dyn Fn(&mut ExperimentSpec)| {
            let mut s = base.clone();
            f(&mut s);
            assert!(matches!(s.validate(), Err(HarnessError::Spec(_))));
        };
        bad(&|s| s.repeats = 0);
        bad(&|s| s.k_range = vec![]);
        bad(&|s| s.k_range = vec![1, 2]);
        bad(&|s| s.variants.clear());
        bad(&|s| s.variants.push(VariantSpec::with_alpha(Variant::L2, 3.0)));
        bad(&|s| s.alpha_sweep = Some(vec![1.0, -1.0]));
        // Distinct labels make duplicates legal.
        let mut s = base.clone();
        s.variants.push(VariantSpec {
            label: Some("l2b".into()),
            ..VariantSpec::new(Variant::L2)
        });
        s.validate().unwrap();
    }

    #[test]
    fn variants_share_initializations_within_a_cell() {
        let ds = small(NoiseKind::Gaussian, 1);
        let spec = quick_spec(Variant::ALL.iter().map(|&v| VariantSpec::new(v)).collect());
        let out = run_on_dataset(&spec, &ds).unwrap();
        assert_eq!(out.records.len(), 2 * 3 * 5);
        for cell in out.records.chunks(5) {
            assert!(cell.iter().all(|r| r.init_hash == cell[0].init_hash && r.succeeded()));
            assert!(cell.iter().all(|r| r.k == cell[0].k && r.repeat == cell[0].repeat));
        }
        let hashes: BTreeSet<&str> = out.records.iter().map(|r| r.init_hash.as_str()).collect();
        assert_eq!(hashes.len(), 6);
        assert_eq!(out.report.rows.len(), 10);
        assert!(out.report.rows.iter().all(|r| r.runs == 3 && r.failures == 0));
    }

    #[test]
    fn runs_are_reproducible() {
        let ds = small(NoiseKind::Heavy, 2);
        let spec = quick_spec(vec![VariantSpec::new(Variant::Mccgr), VariantSpec::new(Variant::Kl)]);
        let a = run_on_dataset(&spec, &ds).unwrap();
        let b = run_on_dataset(&spec, &ds).unwrap();
        assert_eq!(a.report, b.report);
        let strip = |o: &ExperimentOutcome| -> Vec<(String, Vec<u64>)> {
            o.records
                .iter()
                .map(|r| (r.init_hash.clone(), r.trace.iter().map(|v| v.to_bits()).collect()))
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn failing_variant_is_isolated() {
        let ds = small(NoiseKind::Gaussian, 3);
        let mut spec = quick_spec(vec![VariantSpec::new(Variant::L2), VariantSpec::new(Variant::Grnmf)]);
        spec.k_range = vec![2];
        // 12 samples per pair of classes: a 12-neighbour graph cannot exist.
        spec.knn = 12;
        let out = run_on_dataset(&spec, &ds).unwrap();
        let l2 = out.report.get("l2", 2).unwrap();
        let gr = out.report.get("grnmf", 2).unwrap();
        assert_eq!((l2.runs, l2.failures), (3, 0));
        assert_eq!((gr.runs, gr.failures), (0, 3));
        assert!(gr.mean_accuracy.is_nan());
        assert!(out.records.iter().filter(|r| r.variant == "grnmf").all(|r| r.error.is_some()));
    }

    #[test]
    fn too_many_clusters_is_rejected_up_front() {
        let ds = small(NoiseKind::Gaussian, 3);
        let mut spec = quick_spec(vec![VariantSpec::new(Variant::L2)]);
        spec.k_range = vec![4];
        assert!(matches!(
            run_on_dataset(&spec, &ds),
            Err(HarnessError::TooFewClasses { available: 3, requested: 4 })
        ));
        let unlabeled = LabeledDataset::new(ds.matrix.clone(), None).unwrap();
        assert!(matches!(run_on_dataset(&spec, &unlabeled), Err(HarnessError::MissingLabels)));
    }

    fn record(variant: &str, repeat: usize, accuracy: f64, error: Option<&str>) -> RunRecord {
        RunRecord {
            variant: variant.into(),
            k: 2,
            repeat,
            accuracy,
            nmi: accuracy / 2.0,
            iterations: 1,
            converged: true,
            final_objective: 1.0,
            init_hash: String::new(),
            error: error.map(Into::into),
            trace: vec![1.0],
            wall_time: Duration::ZERO,
        }
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let records = vec![
            record("a", 0, 0.5, None),
            record("a", 1, 1.0, None),
            record("a", 2, 0.0, Some("boom")),
            record("b", 0, 0.75, None),
        ];
        let ids = vec!["a".to_string(), "b".to_string()];
        let rep = aggregate(&records, &[2], &ids);
        let a = rep.get("a", 2).unwrap();
        assert_eq!(a.mean_accuracy, 0.75);
        assert!((a.std_accuracy - 0.125f64.sqrt()).abs() < 1e-15);
        assert_eq!((a.runs, a.failures), (2, 1));
        let b = rep.get("b", 2).unwrap();
        assert_eq!((b.mean_accuracy, b.std_accuracy, b.mean_nmi), (0.75, 0.0, 0.375));
        let mut shuffled = records.clone();
        shuffled.reverse();
        assert_eq!(aggregate(&shuffled, &[2], &ids), rep);
    }

    #[test]
    fn report_files() {
        let ds = small(NoiseKind::Gaussian, 6);
        let spec = quick_spec(vec![VariantSpec::new(Variant::L2), VariantSpec::new(Variant::Mcc)]);
        let out = run_on_dataset(&spec, &ds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&out, dir.path()).unwrap();
        let acc = fs::read_to_string(dir.path().join("accuracy.csv")).unwrap();
        let lines: Vec<&str> = acc.lines().collect();
        assert_eq!(lines[0], "k,l2,mcc");
        assert!(lines[1].starts_with("2,") && lines[2].starts_with("3,"));
        let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
        assert_eq!(runs.lines().count(), 1 + 12);
        let trace = fs::read_to_string(dir.path().join("traces/mcc_k3_r2.csv")).unwrap();
        assert!(trace.starts_with("iteration,objective\n1,"));
        let back = read_summary(&dir.path().join("summary.json")).unwrap();
        assert_eq!(back.rows.len(), out.report.rows.len());
        for (x, y) in back.rows.iter().zip(&out.report.rows) {
            assert_eq!(x.mean_accuracy.to_bits(), y.mean_accuracy.to_bits());
        }

        let empty = ExperimentOutcome {
            records: vec![record("a", 0, 0.0, Some("x"))],
            ..out
        };
        assert!(matches!(emit_report(&empty, dir.path()), Err(HarnessError::NoRecords)));
    }

    #[test]
    fn sweep_is_sorted_by_alpha() {
        let ds = small(NoiseKind::Gaussian, 8);
        let mut spec = quick_spec(vec![VariantSpec::new(Variant::Mccgr)]);
        spec.alpha_sweep = Some(vec![100.0, 1.0, 10.0]);
        spec.repeats = 2;
        let rows = alpha_sweep(&spec, &ds).unwrap();
        let alphas: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
        assert_eq!(alphas, vec![1.0, 10.0, 100.0]);
        assert!(rows.iter().all(|r| r.runs == 2));
        let dir = tempfile::tempdir().unwrap();
        emit_sweep(&rows, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("alpha_sweep.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
    }
}
