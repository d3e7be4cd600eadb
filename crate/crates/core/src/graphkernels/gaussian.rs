//! Normalized Gaussian kernels with global and per-point bandwidths.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{FeatureMatrix, GraphMeta, WeightedGraph};
use crate::error::{Error, Result};

/// Neighbour rank used for bandwidths when none is given.
pub const DEFAULT_KNN: usize = 10;

fn check_k(k: usize, m: usize) -> Result<()> {
    if k == 0 || k >= m {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k < M (k = {k}, M = {m})"
        )));
    }
    Ok(())
}

/// Distance from each item to its k-th nearest neighbour, self excluded.
/// Equal distances are ranked by index.
pub fn knn_distances(sq_dist: &DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    let m = sq_dist.nrows();
    check_k(k, m)?;
    Ok((0..m)
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| (sq_dist[(i, j)], j))
                .collect();
            let (_, kth, _) =
                row.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            kth.0.sqrt()
        })
        .collect())
}

pub fn knn_bandwidth_from_sq_distances(sq_dist: &DMatrix<f64>, k: usize) -> Result<f64> {
    Ok(knn_distances(sq_dist, k)?.into_iter().fold(0.0, f64::max))
}

/// Largest k-th-nearest-neighbour distance over all items. A zero result
/// means the bandwidth is degenerate; the kernels reject it.
pub fn knn_bandwidth(points: &FeatureMatrix, k: usize) -> Result<f64> {
    check_k(k, points.nrows())?;
    knn_bandwidth_from_sq_distances(&points.pairwise_sq_distances(), k)
}

/// `K_ij = e_ij / (q_i q_j)` from a symmetric matrix of raw affinities `e`,
/// with `q` the row sums including the diagonal.
fn normalize(e: DMatrix<f64>) -> DMatrix<f64> {
    let m = e.nrows();
    let q: Vec<f64> = (0..m).map(|i| e.row(i).sum()).collect();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = e[(i, j)] / (q[i] * q[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

pub fn normalized_gaussian_from_sq_distances(
    sq_dist: &DMatrix<f64>,
    sigma: f64,
) -> Result<WeightedGraph> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::DegenerateBandwidth(format!(
            "sigma = {sigma}; duplicated points collapse the k-nearest-neighbour bandwidth"
        )));
    }
    let s2 = sigma * sigma;
    let e = sq_dist.map(|d| (-d / s2).exp());
    WeightedGraph::new(
        normalize(e),
        GraphMeta::new("normalized_gaussian", &[("sigma", sigma)]),
    )
}

/// Gaussian affinities with a global bandwidth, normalized by the product
/// of the two endpoint row sums (self included).
pub fn normalized_gaussian(points: &FeatureMatrix, sigma: f64) -> Result<WeightedGraph> {
    normalized_gaussian_from_sq_distances(&points.pairwise_sq_distances(), sigma)
}

pub fn self_tuning_gaussian_from_sq_distances(
    sq_dist: &DMatrix<f64>,
    k: usize,
) -> Result<WeightedGraph> {
    let sigma = knn_distances(sq_dist, k)?;
    if let Some(i) = sigma.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::DegenerateBandwidth(format!(
            "item {i} has sigma_i = {} (duplicates within its {k}-neighbourhood)",
            sigma[i]
        )));
    }
    let m = sq_dist.nrows();
    let e = DMatrix::from_fn(m, m, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        (-sq_dist[(a, b)] / (sigma[a] * sigma[b])).exp()
    });
    WeightedGraph::new(
        normalize(e),
        GraphMeta::new("self_tuning_gaussian", &[("k", k as f64)]),
    )
}

/// Gaussian affinities with per-point bandwidths `sigma_i` (distance to the
/// k-th neighbour), `exp(-|x_i - x_j|^2 / (sigma_i sigma_j))`, normalized by
/// the row sums like [`normalized_gaussian`].
pub fn self_tuning_gaussian(points: &FeatureMatrix, k: usize) -> Result<WeightedGraph> {
    check_k(k, points.nrows())?;
    self_tuning_gaussian_from_sq_distances(&points.pairwise_sq_distances(), k)
}
