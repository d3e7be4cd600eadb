//! Subspace similarity between signal sets and binary kNN graphs.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::{GraphMeta, SignalSet, WeightedGraph};
use crate::error::{Error, Result};

/// Number of leading eigenvectors kept in each projection by default.
pub const DEFAULT_RANK: usize = 10;

/// `R = S^H S / |S|_F^2`, a p x p Hermitian matrix with unit trace.
pub fn second_moment(set: &SignalSet) -> Result<DMatrix<Complex<f64>>> {
    let norm2 = set.norm_squared();
    if norm2.is_nan() || norm2 <= 0.0 {
        return Err(Error::ZeroNormSignal(0));
    }
    if !norm2.is_finite() {
        return Err(Error::InvalidData("non-finite signal value".into()));
    }
    Ok(set.adjoint() * set / Complex::new(norm2, 0.0))
}

/// Eigenvectors of the `rank` largest eigenvalues of a Hermitian matrix as
/// columns, together with those eigenvalues (descending, ties by index).
pub fn top_eigenvectors(
    r: &DMatrix<Complex<f64>>,
    rank: usize,
) -> (DMatrix<Complex<f64>>, Vec<f64>) {
    let eig = SymmetricEigen::new(r.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    order.truncate(rank);
    let vectors = eig.eigenvectors.select_columns(&order);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    (vectors, values)
}

fn flatten(m: &DMatrix<Complex<f64>>) -> Vec<f64> {
    m.iter()
        .map(|c| c.re)
        .chain(m.iter().map(|c| c.im))
        .collect()
}

/// `F[i][j] = Re Tr(R_i^H P_j)`, where `P_j` projects onto the `rank`
/// leading eigenvectors of `R_j`. Entries lie in [0, 1]; F need not be
/// symmetric.
pub fn trace_projection_similarity(sets: &[SignalSet], rank: usize) -> Result<DMatrix<f64>> {
    let m = sets.len();
    if m == 0 {
        return Err(Error::InvalidParameter("no signal sets".into()));
    }
    let p = sets[0].ncols();
    if let Some(i) = sets.iter().position(|s| s.ncols() != p || s.nrows() == 0) {
        return Err(Error::DimensionMismatch(format!(
            "signal set {i} is {}x{}, expected K x {p}",
            sets[i].nrows(),
            sets[i].ncols()
        )));
    }
    if rank == 0 || rank > p {
        return Err(Error::InvalidParameter(format!(
            "rank must satisfy 1 <= rank <= p (rank = {rank}, p = {p})"
        )));
    }
    let pieces: Vec<(Vec<f64>, Vec<f64>)> = sets
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let r = second_moment(s).map_err(|e| match e {
                Error::ZeroNormSignal(_) => Error::ZeroNormSignal(i),
                other => other,
            })?;
            let (v, _) = top_eigenvectors(&r, rank);
            let proj = &v * v.adjoint();
            Ok((flatten(&r), flatten(&proj)))
        })
        .collect::<Result<_>>()?;
    let width = 2 * p * p;
    let a = DMatrix::from_fn(m, width, |i, c| pieces[i].0[c]);
    let b = DMatrix::from_fn(m, width, |j, c| pieces[j].1[c]);
    Ok(a * b.transpose())
}

/// `W[i][j] = 1` when j is among the k most similar items to i or i is
/// among the k most similar to j (self excluded, ties by smaller index).
pub fn binary_mutual_knn(similarity: &DMatrix<f64>, k: usize) -> Result<WeightedGraph> {
    let m = similarity.nrows();
    if similarity.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "similarity is {}x{}",
            m,
            similarity.ncols()
        )));
    }
    if k == 0 || k >= m {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k < M (k = {k}, M = {m})"
        )));
    }
    if similarity.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite similarity".into()));
    }
    let mut w = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut cand: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        cand.sort_by(|&a, &b| {
            similarity[(i, b)]
                .total_cmp(&similarity[(i, a)])
                .then(a.cmp(&b))
        });
        for &j in &cand[..k] {
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
    }
    WeightedGraph::new(w, GraphMeta::new("binary_knn", &[("k", k as f64)]))
}
