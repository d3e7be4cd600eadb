//! Normalized graph Laplacians and their low-frequency eigenvector
//! embeddings.

mod lanczos;

use std::collections::VecDeque;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphkernels::{read_matrix_csv, sidecar_path, WeightedGraph};

pub use lanczos::{largest_eigenpairs, LanczosOptions};

/// Graphs larger than this use the iterative solver.
pub const DEFAULT_DENSE_LIMIT: usize = 4000;

/// Eigenvalues closer than this are treated as one degenerate cluster.
const CLUSTER_GAP: f64 = 1e-9;

/// `L = I - D^{-1/2} W D^{-1/2}` with the degrees it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    matrix: DMatrix<f64>,
    degrees: Vec<f64>,
    components: usize,
}

pub fn normalized_laplacian(graph: &WeightedGraph) -> Result<Laplacian> {
    let w = graph.weights();
    let m = w.nrows();
    let degrees: Vec<f64> = (0..m).map(|i| w.row(i).sum()).collect();
    if let Some(i) = degrees.iter().position(|&d| d.is_nan() || d <= 0.0) {
        return Err(Error::IsolatedNode(i));
    }
    let mut matrix = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = if i == j { 1.0 } else { 0.0 } - w[(i, j)] / (degrees[i] * degrees[j]).sqrt();
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    Ok(Laplacian {
        matrix,
        degrees,
        components: count_components(w),
    })
}

/// Connected components of the graph with an edge wherever `W_ij > 0`.
fn count_components(w: &DMatrix<f64>) -> usize {
    let m = w.nrows();
    let mut seen = vec![false; m];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..m {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for v in 0..m {
                if !seen[v] && w[(u, v)] > 0.0 {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    count
}

impl Laplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_connected(&self) -> bool {
        self.components == 1
    }

    /// All eigenvalues in ascending order (dense solve).
    pub fn spectrum(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `|L u - lambda u|`.
    pub fn residual(&self, u: &DVector<f64>, lambda: f64) -> f64 {
        (&self.matrix * u - u * lambda).norm()
    }

    /// Smallest `count` eigenpairs, ascending.
    fn smallest(&self, count: usize, dense_limit: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let m = self.len();
        if m <= dense_limit {
            let eig = SymmetricEigen::new(self.matrix.clone());
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| {
                eig.eigenvalues[a]
                    .total_cmp(&eig.eigenvalues[b])
                    .then(a.cmp(&b))
            });
            order.truncate(count);
            let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            return Ok((values, eig.eigenvectors.select_columns(&order)));
        }
        // smallest eigenvalues of L are the largest of 2I - L
        let opts = LanczosOptions::for_count(m, count);
        let (values, vectors) =
            largest_eigenpairs(|v| v * 2.0 - &self.matrix * v, m, count, &opts)?;
        Ok((values.into_iter().map(|t| 2.0 - t).collect(), vectors))
    }
}

/// Rows are nodes, columns the low-frequency eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    vectors: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    skipped_trivial: bool,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingSidecar {
    eigenvalues: Vec<f64>,
    skipped_trivial: bool,
    sign_convention: String,
}

const SIGN_CONVENTION: &str = "max-abs-positive";

impl Embedding {
    /// Wraps precomputed vectors; no eigen-relation is checked.
    pub fn from_parts(
        vectors: DMatrix<f64>,
        eigenvalues: Vec<f64>,
        skipped_trivial: bool,
    ) -> Result<Self> {
        if vectors.ncols() != eigenvalues.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns but {} eigenvalues",
                vectors.ncols(),
                eigenvalues.len()
            )));
        }
        if vectors
            .iter()
            .chain(eigenvalues.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidData("non-finite embedding entry".into()));
        }
        Ok(Self {
            vectors,
            eigenvalues,
            skipped_trivial,
        })
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn skipped_trivial(&self) -> bool {
        self.skipped_trivial
    }

    pub fn nrows(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// The first `dim` columns.
    pub fn truncate(&self, dim: usize) -> Result<Embedding> {
        if dim == 0 || dim > self.dim() {
            return Err(Error::InvalidParameter(format!(
                "cannot keep {dim} of {} embedding columns",
                self.dim()
            )));
        }
        Ok(Embedding {
            vectors: self.vectors.columns(0, dim).into_owned(),
            eigenvalues: self.eigenvalues[..dim].to_vec(),
            skipped_trivial: self.skipped_trivial,
        })
    }

    /// Rows `idx` in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> DMatrix<f64> {
        self.vectors.select_rows(idx)
    }

    /// CSV with a header `id,u0,u1,...` and a JSON sidecar `<path>.json`.
    pub fn save(&self, csv_path: impl AsRef<Path>) -> Result<()> {
        let csv_path = csv_path.as_ref();
        let mut w = csv::Writer::from_path(csv_path)?;
        let mut header = vec!["id".to_string()];
        header.extend((0..self.dim()).map(|c| format!("u{c}")));
        w.write_record(&header)?;
        for i in 0..self.nrows() {
            let mut rec = vec![i.to_string()];
            rec.extend(self.vectors.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        let side = EmbeddingSidecar {
            eigenvalues: self.eigenvalues.clone(),
            skipped_trivial: self.skipped_trivial,
            sign_convention: SIGN_CONVENTION.into(),
        };
        std::fs::write(sidecar_path(csv_path), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(csv_path: impl AsRef<Path>) -> Result<Self> {
        let csv_path = csv_path.as_ref();
        let raw = read_matrix_csv(csv_path, true)?;
        if raw.ncols() == 0 {
            return Err(Error::InvalidData("embedding file has no columns".into()));
        }
        let side: EmbeddingSidecar =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(csv_path))?)?;
        Self::from_parts(
            raw.columns(1, raw.ncols() - 1).into_owned(),
            side.eigenvalues,
            side.skipped_trivial,
        )
    }
}

/// Index of the largest-magnitude entry (first one on ties).
fn anchor_index(u: &[f64]) -> usize {
    let mut best = (0, -1.0);
    for (i, v) in u.iter().enumerate() {
        if v.abs() > best.1 {
            best = (i, v.abs());
        }
    }
    best.0
}

/// Embedding from the `dim` smallest eigenpairs, optionally after removing
/// the trivial `D^{1/2} 1` direction.
pub fn embed(lap: &Laplacian, dim: usize, skip_trivial: bool) -> Result<Embedding> {
    embed_with_limit(lap, dim, skip_trivial, DEFAULT_DENSE_LIMIT)
}

/// [`embed`] with an explicit size above which the iterative solver is used.
pub fn embed_with_limit(
    lap: &Laplacian,
    dim: usize,
    skip_trivial: bool,
    dense_limit: usize,
) -> Result<Embedding> {
    let m = lap.len();
    let count = dim + usize::from(skip_trivial);
    if dim == 0 || count > m {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension {dim} too large for {m} nodes (skip_trivial = {skip_trivial})"
        )));
    }
    if skip_trivial && !lap.is_connected() {
        return Err(Error::Disconnected);
    }
    let (mut values, mut vectors) = lap.smallest(count, dense_limit)?;
    if skip_trivial {
        let trivial = DVector::from_iterator(m, lap.degrees().iter().map(|d| d.sqrt())).normalize();
        let drop = (0..count)
            .map(|c| (c, vectors.column(c).dot(&trivial).abs()))
            .fold(
                (0, -1.0),
                |best, (c, a)| if a > best.1 { (c, a) } else { best },
            )
            .0;
        values.remove(drop);
        vectors = vectors.remove_column(drop);
    }

    let mut cols: Vec<(f64, Vec<f64>)> = (0..dim)
        .map(|c| {
            let mut u: Vec<f64> = vectors.column(c).iter().copied().collect();
            let a = anchor_index(&u);
            if u[a] < 0.0 {
                u.iter_mut().for_each(|v| *v = -*v);
            }
            (values[c], u)
        })
        .collect();
    // within a degenerate cluster the basis is arbitrary; order it by anchor
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && cols[end].0 - cols[end - 1].0 < CLUSTER_GAP {
            end += 1;
        }
        cols[start..end].sort_by_key(|(_, u)| anchor_index(u));
        start = end;
    }
    let eigenvalues = cols.iter().map(|(v, _)| *v).collect();
    let vectors = DMatrix::from_fn(m, dim, |i, c| cols[c].1[i]);
    Ok(Embedding {
        vectors,
        eigenvalues,
        skipped_trivial: skip_trivial,
    })
}
