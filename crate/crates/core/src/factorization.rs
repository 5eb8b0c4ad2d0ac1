//! NMF objectives and solvers.
//!
//! The central model factorizes a non-negative `X` (D×N) as `H W` with a
//! per-feature correntropy weighting and a graph smoothness term on the
//! columns of `W`. Each iteration runs one expectation step, which computes
//! the kernel width `σ` and the auxiliary weights `ρ_d = −exp(−r_d²/(2σ²))`
//! from the current per-feature squared residuals `r_d²`. It then runs one
//! maximization step, which applies multiplicative updates for `H` (using
//! the old `W`) and then for `W` (using the new `H`). With `ρ` fixed, these
//! updates never increase the weighted objective
//!
//! ```text
//! Tr[(X − HW)ᵀ diag(−ρ) (X − HW)] + α Tr(W L Wᵀ)
//! ```
//!
//! The baseline variants are restrictions of the same loop:
//!
//! | variant | ρ        | α    |
//! |---------|----------|------|
//! | L2      | −1       | 0    |
//! | GRNMF   | −1       | α    |
//! | MCC     | live     | 0    |
//! | MCCGR   | live     | α    |
//!
//! KL uses the standard multiplicative updates for the generalized
//! Kullback–Leibler divergence and tracks that divergence instead.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis, Zip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{graph_penalty, laplacian, AffinityGraph, GraphError};
use crate::matrix::{random_nonneg_stream, DenseMatrix, MatrixError};

/// Added to every multiplicative-update denominator.
pub const DEFAULT_EPSILON: f64 = 1e-12;
/// Lower bound applied to every entry of `H` and `W` after an update.
pub const VALUE_FLOOR: f64 = 1e-16;
pub const DEFAULT_THETA: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("variant {0} with alpha > 0 needs an affinity graph")]
    MissingGraph(Variant),
    #[error("initial {0} must be strictly positive")]
    NonPositiveInit(&'static str),
    #[error("kernel width must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("KL divergence undefined: (HW) is zero at ({row}, {col}) where X is positive")]
    KlUndefined { row: usize, col: usize },
    #[error("numerical failure at iteration {iteration}: {what}")]
    Numerical { iteration: usize, what: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub type Result<T> = std::result::Result<T, SolveError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    L2,
    Kl,
    Grnmf,
    Mcc,
    Mccgr,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::L2,
        Variant::Kl,
        Variant::Grnmf,
        Variant::Mcc,
        Variant::Mccgr,
    ];

    /// Whether ρ is re-estimated every iteration (otherwise frozen at −1).
    pub fn uses_correntropy(self) -> bool {
        matches!(self, Variant::Mcc | Variant::Mccgr)
    }

    pub fn uses_graph(self) -> bool {
        matches!(self, Variant::Grnmf | Variant::Mccgr)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::L2 => "l2",
            Variant::Kl => "kl",
            Variant::Grnmf => "grnmf",
            Variant::Mcc => "mcc",
            Variant::Mccgr => "mccgr",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Latent dimension K.
    pub k: usize,
    /// Graph weight; ignored by variants without a graph term.
    pub alpha: f64,
    /// Kernel-width scale.
    pub theta: f64,
    pub max_iter: usize,
    /// Relative change of the tracked objective below which a run stops.
    pub tol: f64,
    pub seed: u64,
    pub epsilon: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Mccgr,
            k: 2,
            alpha: DEFAULT_ALPHA,
            theta: DEFAULT_THETA,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            seed: 0,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl SolverConfig {
    pub fn new(variant: Variant, k: usize) -> Self {
        Self {
            variant,
            k,
            ..Self::default()
        }
    }

    /// α as seen by the updates: zero for variants without a graph term.
    pub fn effective_alpha(&self) -> f64 {
        if self.variant.uses_graph() {
            self.alpha
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(SolveError::Config("k must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(SolveError::Config(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(SolveError::Config(format!(
                "theta must be positive, got {}",
                self.theta
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(SolveError::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(SolveError::Config("max_iter must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(SolveError::Config(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Result of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub h: DenseMatrix,
    pub w: DenseMatrix,
    /// Auxiliary weights used in the final maximization step.
    pub rho: Vec<f64>,
    /// Kernel width computed in the final expectation step.
    pub sigma: f64,
    /// Tracked objective after each iteration.
    pub trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

fn check_product(x: &DenseMatrix, h: &DenseMatrix, w: &DenseMatrix) -> Result<()> {
    if h.rows() != x.rows() || w.cols() != x.cols() || h.cols() != w.rows() {
        return Err(SolveError::Dimension(format!(
            "X {:?}, H {:?}, W {:?}",
            x.shape(),
            h.shape(),
            w.shape()
        )));
    }
    Ok(())
}

fn check_rho(x: &DenseMatrix, rho: &[f64]) -> Result<()> {
    if rho.len() != x.rows() {
        return Err(SolveError::Dimension(format!(
            "rho has {} entries for {} features",
            rho.len(),
            x.rows()
        )));
    }
    Ok(())
}

fn check_graph(w: &DenseMatrix, alpha: f64, graph: Option<&AffinityGraph>) -> Result<()> {
    match graph {
        Some(g) if g.n() != w.cols() => Err(SolveError::Graph(GraphError::Dimension {
            cols: w.cols(),
            n: g.n(),
        })),
        None if alpha > 0.0 => Err(SolveError::MissingGraph(Variant::Mccgr)),
        _ => Ok(()),
    }
}

fn residual(x: &DenseMatrix, h: &DenseMatrix, w: &DenseMatrix) -> Array2<f64> {
    x.view() - &h.view().dot(w.view())
}

/// Per-feature squared residuals `r_d² = Σ_n (x_dn − (HW)_dn)²`.
pub fn residual_rows(x: &DenseMatrix, h: &DenseMatrix, w: &DenseMatrix) -> Result<Vec<f64>> {
    check_product(x, h, w)?;
    Ok(residual(x, h, w)
        .map_axis(Axis(1), |r| r.dot(&r))
        .to_vec())
}

/// Squared Frobenius reconstruction error `‖X − HW‖²`.
pub fn objective_l2(x: &DenseMatrix, h: &DenseMatrix, w: &DenseMatrix) -> Result<f64> {
    check_product(x, h, w)?;
    Ok(residual(x, h, w).iter().map(|e| e * e).sum())
}

/// Generalized KL divergence `Σ x ln(x/(HW)) − x + (HW)` with `0 ln 0 = 0`.
pub fn objective_kl(x: &DenseMatrix, h: &DenseMatrix, w: &DenseMatrix) -> Result<f64> {
    check_product(x, h, w)?;
    let approx = h.view().dot(w.view());
    let mut total = 0.0;
    for ((row, col), &xv) in x.view().indexed_iter() {
        let a = approx[[row, col]];
        if xv > 0.0 {
            if a <= 0.0 {
                return Err(SolveError::KlUndefined { row, col });
            }
            total += xv * (xv / a).ln() - xv + a;
        } else {
            total += a;
        }
    }
    Ok(total)
}

/// Gaussian kernel `exp(−r² / (2σ²))` of a squared distance.
fn gaussian(r2: f64, sigma: f64) -> f64 {
    (-r2 / (2.0 * sigma * sigma)).exp()
}

/// Expectation step: `ρ_d = −g(r_d, σ)`.
///
/// Kernel values that underflow are clamped to the smallest positive normal
/// so every `ρ_d` stays in `[−1, 0)`.
pub fn rho_step(x: &DenseMatrix, h: &DenseMatrix, w: &DenseMatrix, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(SolveError::InvalidSigma(sigma));
    }
    Ok(residual_rows(x, h, w)?
        .into_iter()
        .map(|r2| -gaussian(r2, sigma).max(f64::MIN_POSITIVE))
        .collect())
}

/// Kernel width `σ = sqrt(θ/(2D) · ‖X − HW‖²)`, or `epsilon` when the total
/// squared residual is below `epsilon`.
pub fn sigma_update(x: &DenseMatrix, h: &DenseMatrix, w: &DenseMatrix, theta: f64, epsilon: f64) -> Result<f64> {
    let total = objective_l2(x, h, w)?;
    if total < epsilon {
        return Ok(epsilon);
    }
    Ok((theta / (2.0 * x.rows() as f64) * total).sqrt())
}

/// Correntropy objective `Σ_d exp(−r_d²/(2σ²))`, in `(0, D]`.
pub fn mcc_objective(x: &DenseMatrix, h: &DenseMatrix, w: &DenseMatrix, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(SolveError::InvalidSigma(sigma));
    }
    Ok(residual_rows(x, h, w)?
        .into_iter()
        .map(|r2| gaussian(r2, sigma))
        .sum())
}

fn weights(rho: &[f64]) -> Array1<f64> {
    rho.iter().map(|r| -r).collect()
}

/// `diag(s) · m`.
fn scale_rows(m: &Array2<f64>, s: &Array1<f64>) -> Array2<f64> {
    m * &s.view().insert_axis(Axis(1))
}

fn multiplicative(base: &Array2<f64>, num: &Array2<f64>, den: &Array2<f64>, epsilon: f64) -> DenseMatrix {
    let mut out = base.clone();
    Zip::from(&mut out)
        .and(num)
        .and(den)
        .for_each(|o, &n, &d| *o = (*o * n / (d + epsilon)).max(VALUE_FLOOR));
    DenseMatrix::from_array_unchecked(out)
}

/// Basis update `h ← h ∘ (diag(−ρ) X Wᵀ) / (diag(−ρ) H W Wᵀ + ε)`.
pub fn update_h(
    x: &DenseMatrix,
    h: &DenseMatrix,
    w: &DenseMatrix,
    rho: &[f64],
    epsilon: f64,
) -> Result<DenseMatrix> {
    check_product(x, h, w)?;
    check_rho(x, rho)?;
    let s = weights(rho);
    let wt = w.view().t();
    let num = scale_rows(&x.view().dot(&wt), &s);
    let den = scale_rows(&h.view().dot(&w.view().dot(&wt)), &s);
    Ok(multiplicative(h.view(), &num, &den, epsilon))
}

/// Coefficient update
/// `w ← w ∘ (Hᵀ diag(−ρ) X + α W A) / (Hᵀ diag(−ρ) H W + α W U + ε)`.
///
/// `h` should already be the updated basis. The graph may be omitted when
/// `alpha` is zero.
pub fn update_w(
    x: &DenseMatrix,
    h: &DenseMatrix,
    w: &DenseMatrix,
    rho: &[f64],
    alpha: f64,
    graph: Option<&AffinityGraph>,
    epsilon: f64,
) -> Result<DenseMatrix> {
    check_product(x, h, w)?;
    check_rho(x, rho)?;
    check_graph(w, alpha, graph)?;
    let s = weights(rho);
    let hs = scale_rows(h.view(), &s);
    let mut num = hs.t().dot(x.view());
    let mut den = hs.t().dot(h.view()).dot(w.view());
    if alpha > 0.0 {
        let g = graph.expect("checked above");
        let wv = w.view();
        num.scaled_add(alpha, &wv.dot(g.affinity().view()));
        let degree = Array1::from(g.degree().to_vec());
        den.scaled_add(alpha, &(wv * &degree.view().insert_axis(Axis(0))));
    }
    Ok(multiplicative(w.view(), &num, &den, epsilon))
}

/// Weighted objective minimized by the maximization step:
/// `Tr[(X − HW)ᵀ diag(−ρ)(X − HW)] + α Tr(W L Wᵀ)`.
pub fn dual_objective(
    x: &DenseMatrix,
    h: &DenseMatrix,
    w: &DenseMatrix,
    rho: &[f64],
    alpha: f64,
    graph: Option<&AffinityGraph>,
) -> Result<f64> {
    check_product(x, h, w)?;
    check_rho(x, rho)?;
    check_graph(w, alpha, graph)?;
    let data: f64 = residual_rows(x, h, w)?
        .iter()
        .zip(rho)
        .map(|(r2, r)| -r * r2)
        .sum();
    let smooth = match graph {
        Some(g) if alpha > 0.0 => alpha * graph_penalty(w, g)?,
        _ => 0.0,
    };
    Ok(data + smooth)
}

/// Analytic partial derivatives of [`dual_objective`] with respect to `H`
/// and `W` (without Lagrange-multiplier terms):
///
/// ```text
/// ∂/∂H = −2 diag(−ρ) X Wᵀ + 2 diag(−ρ) H W Wᵀ
/// ∂/∂W = −2 Hᵀ diag(−ρ) X + 2 Hᵀ diag(−ρ) H W + 2α W L
/// ```
pub fn dual_gradient(
    x: &DenseMatrix,
    h: &DenseMatrix,
    w: &DenseMatrix,
    rho: &[f64],
    alpha: f64,
    graph: Option<&AffinityGraph>,
) -> Result<(DenseMatrix, DenseMatrix)> {
    check_product(x, h, w)?;
    check_rho(x, rho)?;
    check_graph(w, alpha, graph)?;
    let s = weights(rho);
    // diag(−ρ)(HW − X)
    let weighted = scale_rows(&(h.view().dot(w.view()) - x.view()), &s);
    let grad_h = weighted.dot(&w.view().t()) * 2.0;
    let mut grad_w = h.view().t().dot(&weighted) * 2.0;
    if let Some(g) = graph.filter(|_| alpha > 0.0) {
        grad_w.scaled_add(2.0 * alpha, &w.view().dot(laplacian(g).view()));
    }
    Ok((
        DenseMatrix::from_array_unchecked(grad_h),
        DenseMatrix::from_array_unchecked(grad_w),
    ))
}

/// Complementarity products `h ∘ ½∂/∂H` and `w ∘ ½∂/∂W`; both vanish at a
/// stationary point of the constrained problem.
pub fn kkt_products(
    x: &DenseMatrix,
    h: &DenseMatrix,
    w: &DenseMatrix,
    rho: &[f64],
    alpha: f64,
    graph: Option<&AffinityGraph>,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (gh, gw) = dual_gradient(x, h, w, rho, alpha, graph)?;
    Ok((
        DenseMatrix::from_array_unchecked(gh.view() * h.view() * 0.5),
        DenseMatrix::from_array_unchecked(gw.view() * w.view() * 0.5),
    ))
}

/// KL basis update `h ← h ∘ ((X ⊘ HW) Wᵀ) / (1 Wᵀ + ε)`.
pub fn update_h_kl(x: &DenseMatrix, h: &DenseMatrix, w: &DenseMatrix, epsilon: f64) -> Result<DenseMatrix> {
    check_product(x, h, w)?;
    let ratio = x.view() / &h.view().dot(w.view());
    let num = ratio.dot(&w.view().t());
    let col_sums = w.view().sum_axis(Axis(1));
    let den = Array2::from_shape_fn(h.shape(), |(_, k)| col_sums[k]);
    Ok(multiplicative(h.view(), &num, &den, epsilon))
}

/// KL coefficient update `w ← w ∘ (Hᵀ (X ⊘ HW)) / (Hᵀ 1 + ε)`.
pub fn update_w_kl(x: &DenseMatrix, h: &DenseMatrix, w: &DenseMatrix, epsilon: f64) -> Result<DenseMatrix> {
    check_product(x, h, w)?;
    let ratio = x.view() / &h.view().dot(w.view());
    let num = h.view().t().dot(&ratio);
    let row_sums = h.view().sum_axis(Axis(0));
    let den = Array2::from_shape_fn(w.shape(), |(k, _)| row_sums[k]);
    Ok(multiplicative(w.view(), &num, &den, epsilon))
}

#[derive(Debug, Clone, PartialEq)]
enum RhoMode {
    /// Re-estimated every iteration (correntropy variants).
    Live,
    /// Held at the given vector.
    Fixed(Vec<f64>),
}

/// Iterative solver state. [`solve`] drives it to completion; tests and the
/// acceptance suite step it directly to inspect iterates.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    x: &'a DenseMatrix,
    graph: Option<&'a AffinityGraph>,
    cfg: SolverConfig,
    h: DenseMatrix,
    w: DenseMatrix,
    rho: Vec<f64>,
    rho_mode: RhoMode,
    sigma: f64,
    trace: Vec<f64>,
    converged: bool,
    /// Objective value treated as exact reconstruction.
    floor: f64,
}

impl<'a> Solver<'a> {
    pub fn new(
        x: &'a DenseMatrix,
        graph: Option<&'a AffinityGraph>,
        cfg: SolverConfig,
        h0: DenseMatrix,
        w0: DenseMatrix,
    ) -> Result<Self> {
        cfg.validate()?;
        if h0.shape() != (x.rows(), cfg.k) || w0.shape() != (cfg.k, x.cols()) {
            return Err(SolveError::Dimension(format!(
                "X {:?} with k={} needs H0 {:?} and W0 {:?}, got {:?} and {:?}",
                x.shape(),
                cfg.k,
                (x.rows(), cfg.k),
                (cfg.k, x.cols()),
                h0.shape(),
                w0.shape()
            )));
        }
        if h0.min_value() <= 0.0 {
            return Err(SolveError::NonPositiveInit("H"));
        }
        if w0.min_value() <= 0.0 {
            return Err(SolveError::NonPositiveInit("W"));
        }
        if !x.is_nonnegative() {
            return Err(SolveError::Config("X must be non-negative".into()));
        }
        let alpha = cfg.effective_alpha();
        match graph {
            None if alpha > 0.0 => return Err(SolveError::MissingGraph(cfg.variant)),
            Some(g) if g.n() != x.cols() => {
                return Err(SolveError::Graph(GraphError::Dimension {
                    cols: x.cols(),
                    n: g.n(),
                }))
            }
            _ => {}
        }
        let rho_mode = if cfg.variant.uses_correntropy() {
            RhoMode::Live
        } else {
            RhoMode::Fixed(vec![-1.0; x.rows()])
        };
        let scale = if cfg.variant == Variant::Kl {
            x.view().sum()
        } else {
            x.view().iter().map(|v| v * v).sum()
        };
        let floor = cfg.epsilon * scale;
        Ok(Self {
            x,
            graph,
            cfg,
            h: h0,
            w: w0,
            rho: vec![-1.0; x.rows()],
            rho_mode,
            sigma: f64::NAN,
            trace: Vec::new(),
            converged: false,
            floor,
        })
    }

    /// Holds ρ at `rho` instead of re-estimating it. Not meaningful for KL.
    pub fn with_fixed_rho(mut self, rho: Vec<f64>) -> Result<Self> {
        check_rho(self.x, &rho)?;
        if let Some(r) = rho.iter().find(|r| !(**r < 0.0 && **r >= -1.0)) {
            return Err(SolveError::Config(format!("rho entries must lie in [-1, 0), got {r}")));
        }
        if self.cfg.variant == Variant::Kl {
            return Err(SolveError::Config("the KL variant has no rho".into()));
        }
        self.rho_mode = RhoMode::Fixed(rho);
        Ok(self)
    }

    pub fn h(&self) -> &DenseMatrix {
        &self.h
    }

    pub fn w(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// One expectation step followed by one maximization step. Returns the
    /// tracked objective after the update.
    pub fn step(&mut self) -> Result<f64> {
        let iteration = self.trace.len() + 1;
        let x = self.x;
        self.sigma = sigma_update(x, &self.h, &self.w, self.cfg.theta, self.cfg.epsilon)?;
        self.rho = match &self.rho_mode {
            RhoMode::Live => rho_step(x, &self.h, &self.w, self.sigma)?,
            RhoMode::Fixed(r) => r.clone(),
        };
        let eps = self.cfg.epsilon;
        let objective = if self.cfg.variant == Variant::Kl {
            let h = update_h_kl(x, &self.h, &self.w, eps)?;
            let w = update_w_kl(x, &h, &self.w, eps)?;
            self.h = h;
            self.w = w;
            objective_kl(x, &self.h, &self.w)?
        } else {
            let alpha = self.cfg.effective_alpha();
            let h = update_h(x, &self.h, &self.w, &self.rho, eps)?;
            let w = update_w(x, &h, &self.w, &self.rho, alpha, self.graph, eps)?;
            self.h = h;
            self.w = w;
            dual_objective(x, &self.h, &self.w, &self.rho, alpha, self.graph)?
        };
        if !objective.is_finite() {
            return Err(SolveError::Numerical {
                iteration,
                what: format!("objective is {objective}"),
            });
        }
        for (name, m) in [("H", &self.h), ("W", &self.w)] {
            if m.view().iter().any(|v| !v.is_finite()) {
                return Err(SolveError::Numerical {
                    iteration,
                    what: format!("{name} has non-finite entries"),
                });
            }
        }
        if let Some(&prev) = self.trace.last() {
            let change = (prev - objective).abs();
            self.converged = change <= self.cfg.tol * prev.abs();
        }
        // Relative changes are meaningless once the fit is at round-off.
        self.converged |= objective <= self.floor;
        self.trace.push(objective);
        Ok(objective)
    }

    /// Steps until converged or `max_iter` iterations have run. A run counts
    /// as converged when the relative change of the tracked objective is at
    /// most `tol`, or when the objective itself falls below `epsilon` times
    /// the scale of `X` (`‖X‖²`, or `Σ X` for KL).
    pub fn run(mut self) -> Result<Factorization> {
        while self.trace.len() < self.cfg.max_iter && !self.converged {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> Factorization {
        Factorization {
            iterations_run: self.trace.len(),
            h: self.h,
            w: self.w,
            rho: self.rho,
            sigma: self.sigma,
            trace: self.trace,
            converged: self.converged,
        }
    }
}

/// Runs the configured variant from `(h0, w0)` until the relative change of
/// its tracked objective drops below `cfg.tol` or `cfg.max_iter` is reached.
pub fn solve(
    x: &DenseMatrix,
    graph: Option<&AffinityGraph>,
    cfg: &SolverConfig,
    h0: DenseMatrix,
    w0: DenseMatrix,
) -> Result<Factorization> {
    Solver::new(x, graph, cfg.clone(), h0, w0)?.run()
}

/// Initial factors for a `d × n` problem with `k` components: `H0` on
/// generator stream 0 and `W0` on stream 1 of `seed`, entries in (0, 1].
pub fn initial_factors(d: usize, k: usize, n: usize, seed: u64) -> (DenseMatrix, DenseMatrix) {
    (
        random_nonneg_stream(d, k, seed, 0),
        random_nonneg_stream(k, n, seed, 1),
    )
}
