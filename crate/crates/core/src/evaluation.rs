//! Clustering evaluation: k-means on the columns of the coefficient matrix,
//! accuracy under the best one-to-one cluster/class matching (Kuhn–Munkres),
//! and normalized mutual information.

use std::collections::BTreeMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{distinct_sorted, seeded_rng, DenseMatrix};

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_LLOYD_ITERATIONS: usize = 300;
const KMEANS_STREAM: u64 = 0x6b6d;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("cannot form {k} clusters from {n} points")]
    ClusterCount { k: usize, n: usize },
    #[error("label sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("label sequences are empty")]
    Empty,
    #[error("confusion matrix must be square, row {row} has {len} entries for {n} rows")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("restart count must be at least 1")]
    NoRestarts,
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster id in `[0, k)` for every point.
    pub assignments: Vec<usize>,
    /// One centroid per column (dim × k).
    pub centroids: DenseMatrix,
    /// Total within-cluster squared distance.
    pub inertia: f64,
    pub restarts_used: usize,
}

fn sq_dist(points: &DenseMatrix, p: usize, centroids: &[Vec<f64>], c: usize) -> f64 {
    points
        .column(p)
        .iter()
        .zip(&centroids[c])
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn nearest(points: &DenseMatrix, p: usize, centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..centroids.len() {
        let d = sq_dist(points, p, centroids, c);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Runs Lloyd's algorithm from the given initial centroid columns.
///
/// Returns the clustering and the inertia recorded after every assignment
/// pass. An empty cluster is reseeded at the point farthest from its own
/// centroid, taken from a cluster with at least two members. When every
/// point sits exactly on its centroid no such reseed exists and the cluster
/// stays empty.
pub fn lloyd(points: &DenseMatrix, initial: &[usize]) -> Result<(Clustering, Vec<f64>)> {
    let n = points.cols();
    let k = initial.len();
    if k == 0 || k > n {
        return Err(EvalError::ClusterCount { k, n });
    }
    let dim = points.rows();
    let mut centroids: Vec<Vec<f64>> = initial.iter().map(|&i| points.column(i).to_vec()).collect();
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut next: Vec<usize> = (0..n).map(|p| nearest(points, p, &centroids)).collect();
        let mut counts = vec![0usize; k];
        for &c in &next {
            counts[c] += 1;
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&p| counts[next[p]] >= 2)
                .map(|p| (sq_dist(points, p, &centroids, next[p]), p))
                .fold(None::<(f64, usize)>, |best, cand| match best {
                    Some(b) if b.0 >= cand.0 => Some(b),
                    _ => Some(cand),
                });
            if let Some((d, p)) = far {
                if d > 0.0 {
                    counts[next[p]] -= 1;
                    counts[empty] = 1;
                    next[p] = empty;
                    centroids[empty] = points.column(p).to_vec();
                }
            }
        }
        let inertia: f64 = (0..n).map(|p| sq_dist(points, p, &centroids, next[p])).sum();
        history.push(inertia);
        let stable = next == assignments;
        assignments = next;
        if stable {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &c) in assignments.iter().enumerate() {
            for (s, v) in sums[c].iter_mut().zip(points.column(p).iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = (0..n)
        .map(|p| sq_dist(points, p, &centroids, assignments[p]))
        .sum();
    let flat: Vec<f64> = (0..dim)
        .flat_map(|r| centroids.iter().map(move |c| c[r]))
        .collect();
    Ok((
        Clustering {
            assignments,
            centroids: DenseMatrix::new(dim, k, flat).expect("non-empty"),
            inertia,
            restarts_used: 1,
        },
        history,
    ))
}

/// k-means over the columns of `points`: `restarts` seeded Lloyd runs, each
/// started from `k` distinct columns drawn uniformly; the lowest-inertia run
/// wins, ties going to the earliest.
pub fn kmeans(points: &DenseMatrix, k: usize, seed: u64, restarts: usize) -> Result<Clustering> {
    let n = points.cols();
    if k == 0 || k > n {
        return Err(EvalError::ClusterCount { k, n });
    }
    if restarts == 0 {
        return Err(EvalError::NoRestarts);
    }
    let mut rng = seeded_rng(seed, KMEANS_STREAM);
    let mut best: Option<Clustering> = None;
    for _ in 0..restarts {
        let initial = index::sample(&mut rng, n, k).into_vec();
        let (run, _) = lloyd(points, &initial)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let mut best = best.expect("restarts >= 1");
    best.restarts_used = restarts;
    Ok(best)
}

/// Maximum-weight perfect matching on a square count matrix (Kuhn–Munkres
/// with potentials, O(n³)). Returns `matching[row] = col`.
pub fn hungarian_match(confusion: &[Vec<u64>]) -> Result<Vec<usize>> {
    let n = confusion.len();
    for (row, r) in confusion.iter().enumerate() {
        if r.len() != n {
            return Err(EvalError::NotSquare { row, len: r.len(), n });
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let top = confusion.iter().flatten().copied().max().unwrap_or(0) as i128;
    // Minimise top − count; 1-based arrays with a virtual column 0.
    let cost = |i: usize, j: usize| top - confusion[i - 1][j - 1] as i128;
    let mut u = vec![0i128; n + 1];
    let mut v = vec![0i128; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i128::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = i128::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut matching = vec![0; n];
    for j in 1..=n {
        matching[owner[j] - 1] = j - 1;
    }
    Ok(matching)
}

/// One row of the cluster→class matching. `None` marks a zero padding row
/// or column added to make the confusion matrix square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub cluster: Option<i64>,
    pub class: Option<i64>,
}

/// Matched accuracy together with the matching and confusion it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub matching: Vec<Match>,
    /// Square counts: rows are clusters (sorted ids, then padding), columns
    /// are classes (sorted ids, then padding).
    pub confusion: Vec<Vec<u64>>,
}

fn check_lengths(a: &[i64], b: &[i64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Fraction of points whose cluster maps to their class under the best
/// one-to-one matching.
pub fn accuracy(predicted: &[i64], truth: &[i64]) -> Result<AccuracyReport> {
    check_lengths(predicted, truth)?;
    let clusters = distinct_sorted(predicted);
    let classes = distinct_sorted(truth);
    let size = clusters.len().max(classes.len());
    let cluster_index: BTreeMap<i64, usize> = clusters.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let class_index: BTreeMap<i64, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut confusion = vec![vec![0u64; size]; size];
    for (p, t) in predicted.iter().zip(truth) {
        confusion[cluster_index[p]][class_index[t]] += 1;
    }
    let perm = hungarian_match(&confusion)?;
    let matched: u64 = perm.iter().enumerate().map(|(r, &c)| confusion[r][c]).sum();
    let matching = perm
        .iter()
        .enumerate()
        .map(|(r, &c)| Match {
            cluster: clusters.get(r).copied(),
            class: classes.get(c).copied(),
        })
        .collect();
    Ok(AccuracyReport {
        accuracy: matched as f64 / predicted.len() as f64,
        matching,
        confusion,
    })
}

fn counts(labels: &[i64]) -> BTreeMap<i64, usize> {
    let mut m = BTreeMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

/// Shannon entropy in nats of the empirical label distribution.
pub fn entropy(labels: &[i64]) -> f64 {
    let n = labels.len() as f64;
    counts(labels)
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information in nats between two labelings of the same points.
pub fn mutual_information(a: &[i64], b: &[i64]) -> Result<f64> {
    check_lengths(a, b)?;
    let n = a.len() as f64;
    let ca = counts(a);
    let cb = counts(b);
    let mut joint = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *joint.entry((*x, *y)).or_insert(0usize) += 1;
    }
    Ok(joint
        .iter()
        .map(|(&(x, y), &c)| {
            let pxy = c as f64 / n;
            let px = ca[&x] as f64 / n;
            let py = cb[&y] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .sum())
}

/// `MI(a, b) / max(H(a), H(b))`, with 1 when both labelings are constant
/// and 0 when exactly one is.
pub fn nmi(a: &[i64], b: &[i64]) -> Result<f64> {
    let mi = mutual_information(a, b)?;
    let ha = entropy(a);
    let hb = entropy(b);
    let ha_zero = ha <= 0.0;
    let hb_zero = hb <= 0.0;
    Ok(match (ha_zero, hb_zero) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (mi / ha.max(hb)).clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub nmi: f64,
    pub matching: Vec<Match>,
    pub confusion: Vec<Vec<u64>>,
    pub assignments: Vec<usize>,
}

/// Clusters the columns of `w` into `k` groups and scores the result
/// against `true_labels`.
pub fn evaluate(
    w: &DenseMatrix,
    true_labels: &[i64],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<EvalReport> {
    if w.cols() != true_labels.len() {
        return Err(EvalError::LengthMismatch(w.cols(), true_labels.len()));
    }
    let clustering = kmeans(w, k, seed, restarts)?;
    let predicted: Vec<i64> = clustering.assignments.iter().map(|&c| c as i64).collect();
    let acc = accuracy(&predicted, true_labels)?;
    Ok(EvalReport {
        accuracy: acc.accuracy,
        nmi: nmi(&predicted, true_labels)?,
        matching: acc.matching,
        confusion: acc.confusion,
        assignments: clustering.assignments,
    })
}
