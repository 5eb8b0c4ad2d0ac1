//! Dense matrix container, labeled datasets, CSV input/output and seeded
//! non-negative random initialization.
//!
//! Storage is a row-major `ndarray::Array2<f64>`. A `DenseMatrix` is never
//! empty and never holds NaN or infinite values; every constructor checks.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed csv: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: row {row} has {found} cells, expected {expected}")]
    Ragged {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: row {row}, col {col}: not a number: {cell:?}")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        col: usize,
        cell: String,
    },
    #[error("{path}: row {row}, col {col}: negative entry {value}")]
    Negative {
        path: PathBuf,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("{path}: no data rows")]
    EmptyFile { path: PathBuf },
    #[error("matrix must have at least one row and one column, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("data length {len} does not match shape {rows}x{cols}")]
    Length { rows: usize, cols: usize, len: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{labels} labels for {columns} data columns")]
    LabelCount { labels: usize, columns: usize },
    #[error("column index {index} out of range for {cols} columns")]
    ColumnIndex { index: usize, cols: usize },
}

pub type Result<T> = std::result::Result<T, MatrixError>;

/// Finite-valued, non-empty dense matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    data: Array2<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix {}x{} {:?}", self.rows(), self.cols(), self.data)
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(MatrixError::EmptyShape { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(MatrixError::Length {
                rows,
                cols,
                len: data.len(),
            });
        }
        let data = Array2::from_shape_vec((rows, cols), data).expect("length checked above");
        Self::from_array(data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * ncols);
        for row in rows {
            if row.len() != ncols {
                return Err(MatrixError::Length {
                    rows: rows.len(),
                    cols: ncols,
                    len: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::new(rows.len(), ncols, flat)
    }

    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows == 0 || cols == 0 {
            return Err(MatrixError::EmptyShape { rows, cols });
        }
        if let Some(((row, col), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(MatrixError::NonFinite { row, col });
        }
        Ok(Self {
            data: data.as_standard_layout().into_owned(),
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self {
            data: Array2::zeros((rows, cols)),
        }
    }

    /// Wraps an array produced by trusted library arithmetic. Non-finite
    /// values are caught later by the solver's numerical checks.
    pub(crate) fn from_array_unchecked(data: Array2<f64>) -> Self {
        debug_assert!(data.nrows() > 0 && data.ncols() > 0);
        Self {
            data: data.as_standard_layout().into_owned(),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[[row, col]]
    }

    pub fn view(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Row-major copy of the entries.
    pub fn to_vec(&self) -> Vec<f64> {
        self.data.iter().copied().collect()
    }

    pub fn column(&self, col: usize) -> ArrayView1<'_, f64> {
        self.data.column(col)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols() != other.rows() {
            return Err(MatrixError::Shape {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Self::from_array_unchecked(self.data.dot(&other.data)))
    }

    pub fn transpose(&self) -> DenseMatrix {
        Self::from_array_unchecked(self.data.t().to_owned())
    }

    /// Maximum absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    /// New matrix made of the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<DenseMatrix> {
        if let Some(&index) = columns.iter().find(|&&c| c >= self.cols()) {
            return Err(MatrixError::ColumnIndex {
                index,
                cols: self.cols(),
            });
        }
        if columns.is_empty() {
            return Err(MatrixError::EmptyShape {
                rows: self.rows(),
                cols: 0,
            });
        }
        Ok(Self::from_array_unchecked(self.data.select(Axis(1), columns)))
    }
}

/// Non-negative data matrix (features x samples) with optional per-column
/// integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub matrix: DenseMatrix,
    pub labels: Option<Vec<i64>>,
    /// Sorted distinct label values.
    pub class_ids: Vec<i64>,
}

impl LabeledDataset {
    pub fn new(matrix: DenseMatrix, labels: Option<Vec<i64>>) -> Result<Self> {
        if let Some((row, col)) = first_negative(&matrix) {
            return Err(MatrixError::Negative {
                path: PathBuf::from("<memory>"),
                row,
                col,
                value: matrix.get(row, col),
            });
        }
        let class_ids = match &labels {
            Some(l) => {
                if l.len() != matrix.cols() {
                    return Err(MatrixError::LabelCount {
                        labels: l.len(),
                        columns: matrix.cols(),
                    });
                }
                distinct_sorted(l)
            }
            None => Vec::new(),
        };
        Ok(Self {
            matrix,
            labels,
            class_ids,
        })
    }

    pub fn features(&self) -> usize {
        self.matrix.rows()
    }

    pub fn samples(&self) -> usize {
        self.matrix.cols()
    }
}

pub(crate) fn distinct_sorted(labels: &[i64]) -> Vec<i64> {
    let mut ids = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids
}

fn first_negative(m: &DenseMatrix) -> Option<(usize, usize)> {
    m.view()
        .indexed_iter()
        .find(|(_, &v)| v < 0.0)
        .map(|(idx, _)| idx)
}

fn read_cells(path: &Path) -> Result<Vec<Vec<String>>> {
    let file = File::open(path).map_err(|source| MatrixError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| MatrixError::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        rows.push(record.iter().map(str::to_owned).collect());
    }
    Ok(rows)
}

/// Reads a headerless numeric CSV into a matrix. Rows of the file become rows
/// of the matrix. Negative entries are rejected.
pub fn load_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let rows = read_cells(path)?;
    let Some(first) = rows.first() else {
        return Err(MatrixError::EmptyFile {
            path: path.to_path_buf(),
        });
    };
    let ncols = first.len();
    let mut data = Vec::with_capacity(rows.len() * ncols);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(MatrixError::Ragged {
                path: path.to_path_buf(),
                row: r,
                expected: ncols,
                found: row.len(),
            });
        }
        for (c, cell) in row.iter().enumerate() {
            let value: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| MatrixError::NonNumeric {
                    path: path.to_path_buf(),
                    row: r,
                    col: c,
                    cell: cell.clone(),
                })?;
            if value < 0.0 {
                return Err(MatrixError::Negative {
                    path: path.to_path_buf(),
                    row: r,
                    col: c,
                    value,
                });
            }
            data.push(value);
        }
    }
    DenseMatrix::new(rows.len(), ncols, data)
}

/// Reads a single-column CSV of integer labels.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<i64>> {
    let path = path.as_ref();
    let rows = read_cells(path)?;
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            if row.len() != 1 {
                return Err(MatrixError::Ragged {
                    path: path.to_path_buf(),
                    row: r,
                    expected: 1,
                    found: row.len(),
                });
            }
            row[0].parse().map_err(|_| MatrixError::NonNumeric {
                path: path.to_path_buf(),
                row: r,
                col: 0,
                cell: row[0].clone(),
            })
        })
        .collect()
}

/// Loads a feature matrix and, when given, its column labels.
pub fn load_dataset(features: impl AsRef<Path>, labels: Option<&Path>) -> Result<LabeledDataset> {
    let matrix = load_csv(features)?;
    let labels = labels.map(load_labels).transpose()?;
    LabeledDataset::new(matrix, labels)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| MatrixError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes `m` as headerless CSV. Values use the shortest decimal rendering
/// that parses back to the same `f64`, so `load_csv(save_csv(m)) == m`.
pub fn save_csv(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = render_csv(m);
    let mut out = create(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| MatrixError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// CSV text for `m`: one line per row, no trailing newline.
pub fn render_csv(m: &DenseMatrix) -> String {
    m.view()
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn save_labels(labels: &[i64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = labels
        .iter()
        .map(i64::to_string)
        .collect::<Vec<_>>()
        .join("\n");
    let mut out = create(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| MatrixError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Seeded generator used for every random draw in the crate: ChaCha8 seeded
/// via `seed_from_u64`, with an explicit stream id so independent draws from
/// one seed never overlap.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Matrix of i.i.d. uniform draws on (0, 1]. Pure function of its arguments.
pub fn random_nonneg(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    random_nonneg_stream(rows, cols, seed, 0)
}

/// Like [`random_nonneg`] but on a chosen generator stream.
pub fn random_nonneg_stream(rows: usize, cols: usize, seed: u64, stream: u64) -> DenseMatrix {
    let mut rng = seeded_rng(seed, stream);
    // random::<f64>() is uniform on [0, 1); reflecting it excludes zero.
    let data: Vec<f64> = (0..rows * cols).map(|_| 1.0 - rng.random::<f64>()).collect();
    DenseMatrix::new(rows, cols, data).expect("shape is non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn parses_two_by_two() {
        let dir = tempfile::tempdir().unwrap();
        let m = load_csv(write(&dir, "a.csv", "1,2\n3,4")).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m.to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_negative_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_csv(write(&dir, "a.csv", "1,2\n3,-1")).unwrap_err();
        match err {
            MatrixError::Negative { row, col, value, .. } => {
                assert_eq!((row, col), (1, 1));
                assert_eq!(value, -1.0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_ragged_and_non_numeric() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_csv(write(&dir, "r.csv", "1,2\n3")),
            Err(MatrixError::Ragged { row: 1, .. })
        ));
        assert!(matches!(
            load_csv(write(&dir, "n.csv", "1,x")),
            Err(MatrixError::NonNumeric { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            load_csv(write(&dir, "e.csv", "")),
            Err(MatrixError::EmptyFile { .. })
        ));
        assert!(matches!(
            load_csv(dir.path().join("missing.csv")),
            Err(MatrixError::Io { .. })
        ));
    }

    #[test]
    fn renders_small_matrices() {
        assert_eq!(render_csv(&DenseMatrix::new(1, 1, vec![0.0]).unwrap()), "0");
        assert_eq!(
            render_csv(&DenseMatrix::new(2, 1, vec![1.5, 2.5]).unwrap()),
            "1.5\n2.5"
        );
    }

    #[test]
    fn file_roundtrip_is_cell_exact() {
        let dir = tempfile::tempdir().unwrap();
        let text = "0.1,0.30000000000000004,7\n1e-300,123456789.123,0";
        let p = write(&dir, "a.csv", text);
        let m = load_csv(&p).unwrap();
        let q = dir.path().join("b.csv");
        save_csv(&m, &q).unwrap();
        assert_eq!(load_csv(&q).unwrap(), m);
    }

    #[test]
    fn random_matrices_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        for seed in 0..100 {
            let m = random_nonneg(10, 10, seed);
            save_csv(&m, &p).unwrap();
            assert_eq!(load_csv(&p).unwrap(), m);
        }
    }

    #[test]
    fn labels_load_and_check_length() {
        let dir = tempfile::tempdir().unwrap();
        let x = write(&dir, "x.csv", "1,2,3\n4,5,6");
        let y = write(&dir, "y.csv", "2\n0\n2");
        let ds = load_dataset(&x, Some(&y)).unwrap();
        assert_eq!(ds.labels.as_deref(), Some(&[2, 0, 2][..]));
        assert_eq!(ds.class_ids, vec![0, 2]);
        let bad = write(&dir, "bad.csv", "1\n2");
        assert!(matches!(
            load_dataset(&x, Some(&bad)),
            Err(MatrixError::LabelCount { labels: 2, columns: 3 })
        ));
    }

    #[test]
    fn random_nonneg_contract() {
        let a = random_nonneg(3, 3, 42);
        assert_eq!(a.to_vec(), random_nonneg(3, 3, 42).to_vec());
        assert_ne!(a.to_vec(), random_nonneg(3, 3, 43).to_vec());
        let big = random_nonneg(100, 100, 7);
        assert!(big.view().iter().all(|&v| v > 0.0 && v <= 1.0));
        assert_ne!(
            random_nonneg_stream(3, 3, 42, 1).to_vec(),
            a.to_vec(),
            "streams must be independent"
        );
    }

    #[test]
    fn constructor_checks() {
        assert!(matches!(
            DenseMatrix::new(0, 2, vec![]),
            Err(MatrixError::EmptyShape { .. })
        ));
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0]),
            Err(MatrixError::Length { .. })
        ));
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(MatrixError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn matmul_is_associative_on_random_instances() {
        for seed in 0..10 {
            let a = random_nonneg(20, 20, seed);
            let b = random_nonneg(20, 20, seed + 100);
            let c = random_nonneg(20, 20, seed + 200);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let diff = (left.view() - right.view()).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let bound = 1e-10 * a.frobenius_norm() * b.frobenius_norm() * c.frobenius_norm();
            assert!(diff <= bound, "{diff} > {bound}");
        }
        assert!(matches!(
            random_nonneg(2, 3, 0).matmul(&random_nonneg(2, 3, 0)),
            Err(MatrixError::Shape { .. })
        ));
    }

    #[test]
    fn select_columns_keeps_order() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = m.select_columns(&[2, 0]).unwrap();
        assert_eq!(s.to_vec(), vec![3.0, 1.0, 6.0, 4.0]);
        assert!(m.select_columns(&[3]).is_err());
    }
}
