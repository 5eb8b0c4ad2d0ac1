//! k-nearest-neighbor affinity graphs over the sample columns of a data
//! matrix, their degree vectors and Laplacians, and the graph smoothness
//! penalty `Tr(W L Wᵀ)`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::DenseMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("need at least 2 samples to build a graph, got {0}")]
    TooFewSamples(usize),
    #[error("neighbor count {k} out of range 1..{n}")]
    NeighborCount { k: usize, n: usize },
    #[error("affinity must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("affinity is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("affinity has a non-zero diagonal at {0}")]
    SelfLoop(usize),
    #[error("affinity has a negative entry at ({0}, {1})")]
    Negative(usize, usize),
    #[error("coefficient matrix has {cols} columns but the graph has {n} nodes")]
    Dimension { cols: usize, n: usize },
}

/// How the two directed k-NN relations are combined into an undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnMode {
    /// Edge iff each endpoint is among the other's k nearest neighbors.
    #[default]
    Mutual,
    /// Edge iff either endpoint is among the other's k nearest neighbors.
    Symmetrized,
}

impl fmt::Display for KnnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KnnMode::Mutual => "mutual",
            KnnMode::Symmetrized => "symmetrized",
        })
    }
}

impl FromStr for KnnMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mutual" => Ok(KnnMode::Mutual),
            "symmetrized" => Ok(KnnMode::Symmetrized),
            other => Err(format!("unknown knn mode {other:?}")),
        }
    }
}

/// Edge weighting scheme. Only 0-1 weights are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Binary,
}

pub const DEFAULT_KNN: usize = 5;

/// Symmetric non-negative affinity with zero diagonal and its degree vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    n: usize,
    affinity: DenseMatrix,
    degree: Vec<f64>,
    /// Neighbor count and mode when built from data.
    knn: Option<(usize, KnnMode)>,
    weighting: Weighting,
}

impl AffinityGraph {
    /// Wraps an explicit affinity matrix after validating it.
    pub fn from_affinity(affinity: DenseMatrix) -> Result<Self, GraphError> {
        let (rows, cols) = affinity.shape();
        if rows != cols {
            return Err(GraphError::NotSquare(rows, cols));
        }
        for i in 0..rows {
            if affinity.get(i, i) != 0.0 {
                return Err(GraphError::SelfLoop(i));
            }
            for j in 0..cols {
                let v = affinity.get(i, j);
                if v < 0.0 {
                    return Err(GraphError::Negative(i, j));
                }
                if v != affinity.get(j, i) {
                    return Err(GraphError::Asymmetric(i, j));
                }
            }
        }
        let degree = affinity.view().rows().into_iter().map(|r| r.sum()).collect();
        Ok(Self {
            n: rows,
            affinity,
            degree,
            knn: None,
            weighting: Weighting::Binary,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn affinity(&self) -> &DenseMatrix {
        &self.affinity
    }

    /// Diagonal of the degree matrix U, `U_nn = Σ_m A_nm`.
    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn knn(&self) -> Option<(usize, KnnMode)> {
        self.knn
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn edge_count(&self) -> usize {
        self.affinity.view().iter().filter(|&&v| v != 0.0).count() / 2
    }
}

fn squared_distance(x: &DenseMatrix, a: usize, b: usize) -> f64 {
    x.column(a)
        .iter()
        .zip(x.column(b).iter())
        .map(|(p, q)| (p - q) * (p - q))
        .sum()
}

/// Indices of the `k` nearest columns to every column, by Euclidean
/// distance. Ties go to the lower column index.
fn neighbor_sets(x: &DenseMatrix, k: usize) -> Vec<Vec<usize>> {
    let n = x.cols();
    (0..n)
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(x, i, j), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Builds a 0-1 weighted k-NN graph over the columns of `x`.
pub fn build_knn_affinity(
    x: &DenseMatrix,
    k: usize,
    mode: KnnMode,
) -> Result<AffinityGraph, GraphError> {
    let n = x.cols();
    if n < 2 {
        return Err(GraphError::TooFewSamples(n));
    }
    if k == 0 || k >= n {
        return Err(GraphError::NeighborCount { k, n });
    }
    let mut is_neighbor = Array2::<bool>::from_elem((n, n), false);
    for (i, set) in neighbor_sets(x, k).into_iter().enumerate() {
        for j in set {
            is_neighbor[[i, j]] = true;
        }
    }
    let mut a = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let edge = match mode {
                KnnMode::Mutual => is_neighbor[[i, j]] && is_neighbor[[j, i]],
                KnnMode::Symmetrized => is_neighbor[[i, j]] || is_neighbor[[j, i]],
            };
            if edge {
                a[[i, j]] = 1.0;
            }
        }
    }
    let mut graph = AffinityGraph::from_affinity(DenseMatrix::from_array_unchecked(a))
        .expect("constructed symmetric with zero diagonal");
    graph.knn = Some((k, mode));
    Ok(graph)
}

/// `L = U − A`.
pub fn laplacian(g: &AffinityGraph) -> DenseMatrix {
    let mut l = g.affinity.view().mapv(|v| -v);
    for (i, d) in g.degree.iter().enumerate() {
        l[[i, i]] = *d;
    }
    DenseMatrix::from_array_unchecked(l)
}

/// Graph smoothness penalty `Tr(W L Wᵀ) = ½ Σ_{n,m} ‖w_n − w_m‖² A_nm`.
pub fn graph_penalty(w: &DenseMatrix, g: &AffinityGraph) -> Result<f64, GraphError> {
    if w.cols() != g.n {
        return Err(GraphError::Dimension {
            cols: w.cols(),
            n: g.n,
        });
    }
    let wv = w.view();
    let wl = wv.dot(&laplacian(g).into_array());
    let trace: f64 = (&wl * wv).sum();
    // Exact value is non-negative; round-off can leave a tiny negative.
    Ok(trace.max(0.0))
}
