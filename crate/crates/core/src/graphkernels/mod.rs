//! Affinity graphs over point sets and signal sets.

mod gaussian;
mod projection;
mod signal;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gaussian::{
    knn_bandwidth, knn_bandwidth_from_sq_distances, knn_distances, normalized_gaussian,
    normalized_gaussian_from_sq_distances, self_tuning_gaussian,
    self_tuning_gaussian_from_sq_distances, DEFAULT_KNN,
};
pub use projection::{
    binary_mutual_knn, second_moment, top_eigenvectors, trace_projection_similarity, DEFAULT_RANK,
};
pub use signal::{KernelSpec, Signals, SimilarityIndex};

/// One device's captured signals, K rows of p features.
pub type SignalSet = DMatrix<Complex<f64>>;

/// Feature vectors, one row per item.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex<f64>>),
}

impl FeatureMatrix {
    pub fn real(m: DMatrix<f64>) -> Result<Self> {
        check_shape(m.nrows(), m.ncols())?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite feature value".into()));
        }
        Ok(FeatureMatrix::Real(m))
    }

    pub fn complex(m: DMatrix<Complex<f64>>) -> Result<Self> {
        check_shape(m.nrows(), m.ncols())?;
        if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidData("non-finite feature value".into()));
        }
        Ok(FeatureMatrix::Complex(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} features, expected {p}",
                rows[i].len()
            )));
        }
        Self::real(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
    }

    pub fn nrows(&self) -> usize {
        match self {
            FeatureMatrix::Real(m) => m.nrows(),
            FeatureMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMatrix::Real(m) => m.ncols(),
            FeatureMatrix::Complex(m) => m.ncols(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, FeatureMatrix::Complex(_))
    }

    /// Rows `idx` in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        match self {
            FeatureMatrix::Real(m) => FeatureMatrix::Real(m.select_rows(idx)),
            FeatureMatrix::Complex(m) => FeatureMatrix::Complex(m.select_rows(idx)),
        }
    }

    /// Squared l2 distance between row `i` of `self` and row `j` of `other`.
    pub fn sq_dist_to(&self, i: usize, other: &FeatureMatrix, j: usize) -> f64 {
        match (self, other) {
            (FeatureMatrix::Real(a), FeatureMatrix::Real(b)) => (0..a.ncols())
                .map(|c| (a[(i, c)] - b[(j, c)]).powi(2))
                .sum(),
            (FeatureMatrix::Complex(a), FeatureMatrix::Complex(b)) => (0..a.ncols())
                .map(|c| (a[(i, c)] - b[(j, c)]).norm_sqr())
                .sum(),
            (FeatureMatrix::Real(a), FeatureMatrix::Complex(b)) => (0..a.ncols())
                .map(|c| (Complex::new(a[(i, c)], 0.0) - b[(j, c)]).norm_sqr())
                .sum(),
            (FeatureMatrix::Complex(_), FeatureMatrix::Real(_)) => other.sq_dist_to(j, self, i),
        }
    }

    /// Exactly symmetric matrix of squared distances with zero diagonal.
    pub fn pairwise_sq_distances(&self) -> DMatrix<f64> {
        let m = self.nrows();
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| ((i + 1)..m).map(|j| self.sq_dist_to(i, self, j)).collect())
            .collect();
        let mut d = DMatrix::zeros(m, m);
        for (i, row) in rows.into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                d[(i, i + 1 + k)] = v;
                d[(i + 1 + k, i)] = v;
            }
        }
        d
    }

    /// Squared distances from every row of `queries` (rows of the result)
    /// to every row of `self` (columns).
    pub fn cross_sq_distances(&self, queries: &FeatureMatrix) -> Result<DMatrix<f64>> {
        if queries.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "query has {} features, known signals have {}",
                queries.dim(),
                self.dim()
            )));
        }
        let (q, m) = (queries.nrows(), self.nrows());
        let rows: Vec<Vec<f64>> = (0..q)
            .into_par_iter()
            .map(|i| (0..m).map(|j| queries.sq_dist_to(i, self, j)).collect())
            .collect();
        Ok(DMatrix::from_fn(q, m, |i, j| rows[i][j]))
    }
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidData(format!(
            "feature matrix must be non-empty, got {rows}x{cols}"
        )));
    }
    Ok(())
}

/// Kernel name and parameters a graph was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GraphMeta {
    pub kernel: String,
    pub params: BTreeMap<String, f64>,
}

impl GraphMeta {
    pub fn new(kernel: &str, params: &[(&str, f64)]) -> Self {
        Self {
            kernel: kernel.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// Symmetric nonnegative affinity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: DMatrix<f64>,
    meta: GraphMeta,
}

impl WeightedGraph {
    pub fn new(weights: DMatrix<f64>, meta: GraphMeta) -> Result<Self> {
        let m = weights.nrows();
        if m != weights.ncols() || m == 0 {
            return Err(Error::DimensionMismatch(format!(
                "weight matrix must be square and non-empty, got {}x{}",
                m,
                weights.ncols()
            )));
        }
        for i in 0..m {
            for j in 0..m {
                let w = weights[(i, j)];
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::InvalidData(format!(
                        "weight ({i},{j}) = {w} is not finite and nonnegative"
                    )));
                }
                if w != weights[(j, i)] {
                    return Err(Error::InvalidData(format!(
                        "weights are not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { weights, meta })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn meta(&self) -> &GraphMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the dense matrix as CSV and the metadata next to it as
    /// `<path>.json`.
    pub fn save(&self, csv_path: impl AsRef<Path>) -> Result<()> {
        let csv_path = csv_path.as_ref();
        write_matrix_csv(csv_path, &self.weights, None)?;
        std::fs::write(
            sidecar_path(csv_path),
            serde_json::to_string_pretty(&self.meta)?,
        )?;
        Ok(())
    }

    pub fn load(csv_path: impl AsRef<Path>) -> Result<Self> {
        let csv_path = csv_path.as_ref();
        let weights = read_matrix_csv(csv_path, false)?;
        let meta: GraphMeta =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(csv_path))?)?;
        Self::new(weights, meta)
    }
}

pub(crate) fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Dense matrix as CSV with an optional header row.
pub(crate) fn write_matrix_csv(
    path: &Path,
    m: &DMatrix<f64>,
    header: Option<&[String]>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_matrix_csv(path: &Path, has_header: bool) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(n as u64 + 1, |p| p.line());
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("'{s}': {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}
