use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::floorplan::Point;
use crate::graphkernels::{KernelSpec, Signals, SimilarityIndex};
use crate::spectral::Embedding;

fn row_sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols())
        .map(|c| (a[(i, c)] - b[(j, c)]).powi(2))
        .sum()
}

/// For each row of `queries`, the nearest row of `reference` and the
/// squared distance to it (ties by smaller index).
fn nearest_with_dist(
    queries: &DMatrix<f64>,
    reference: &DMatrix<f64>,
) -> Result<Vec<(usize, f64)>> {
    if queries.ncols() != reference.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "rows of width {} compared against rows of width {}",
            queries.ncols(),
            reference.ncols()
        )));
    }
    if reference.nrows() == 0 {
        return Err(Error::InvalidParameter("empty reference set".into()));
    }
    Ok((0..queries.nrows())
        .into_par_iter()
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for j in 0..reference.nrows() {
                let d = row_sq_dist(queries, i, reference, j);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .collect())
}

pub fn nearest_rows(queries: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<Vec<usize>> {
    Ok(nearest_with_dist(queries, reference)?
        .into_iter()
        .map(|(j, _)| j)
        .collect())
}

/// Position of the area point whose embedding row is nearest to each row of
/// `psi`.
pub fn localize_1nn(
    psi: &DMatrix<f64>,
    area_emb: &Embedding,
    area_points: &[Point],
) -> Result<Vec<Point>> {
    if area_points.len() != area_emb.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} area points for {} embedding rows",
            area_points.len(),
            area_emb.nrows()
        )));
    }
    Ok(nearest_rows(psi, area_emb.vectors())?
        .into_iter()
        .map(|j| area_points[j])
        .collect())
}

/// Mean squared nearest-neighbour distance from the area rows to `psi`
/// plus the same from `psi` to the area rows.
pub fn matching_loss(area_emb: &Embedding, psi: &DMatrix<f64>) -> Result<f64> {
    let a = area_emb.vectors();
    if psi.nrows() == 0 {
        return Err(Error::InvalidParameter("empty calibrated set".into()));
    }
    let forward = nearest_with_dist(a, psi)?;
    let backward = nearest_with_dist(psi, a)?;
    let mean = |v: &[(usize, f64)]| v.iter().map(|(_, d)| d).sum::<f64>() / v.len() as f64;
    Ok(mean(&forward) + mean(&backward))
}

/// Estimated position of each new signal: the estimate of its most similar
/// known signal under `kernel`.
pub fn extend_out_of_sample(
    new: &Signals,
    known: &Signals,
    estimates: &[Point],
    kernel: &KernelSpec,
) -> Result<Vec<Point>> {
    extend_with_index(&SimilarityIndex::new(kernel, known)?, new, estimates)
}

pub fn extend_with_index(
    index: &SimilarityIndex,
    new: &Signals,
    estimates: &[Point],
) -> Result<Vec<Point>> {
    if estimates.len() != index.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates for {} known signals",
            estimates.len(),
            index.len()
        )));
    }
    Ok(index
        .most_similar(new)?
        .into_iter()
        .map(|j| estimates[j])
        .collect())
}
