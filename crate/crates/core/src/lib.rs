//! Graph-regularized non-negative matrix factorization under the maximum
//! correntropy criterion, the baseline NMF variants it generalizes, and the
//! clustering evaluation protocol used to compare them.
//!
//! Modules, bottom-up:
//!
//! - [`matrix`]: dense matrices, CSV input/output, seeded initialization.
//! - [`graph`]: k-NN affinity graphs and Laplacians.
//! - [`factorization`]: objectives, update rules and the iterative solver.
//! - [`evaluation`]: k-means, Kuhn–Munkres matched accuracy and NMI.
//! - [`harness`]: synthetic data, repeated experiments and report files.

pub mod evaluation;
pub mod factorization;
pub mod graph;
pub mod harness;
pub mod matrix;

pub use evaluation::{evaluate, EvalReport};
pub use factorization::{solve, Factorization, Solver, SolverConfig, Variant};
pub use graph::{build_knn_affinity, AffinityGraph, KnnMode};
pub use matrix::{DenseMatrix, LabeledDataset};
