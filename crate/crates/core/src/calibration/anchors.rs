//! Anchor selection helpers.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn check_count(n: usize, m: usize) -> Result<()> {
    if n == 0 || n > m {
        return Err(Error::InvalidParameter(format!(
            "cannot choose {n} anchors from {m} devices"
        )));
    }
    Ok(())
}

/// `n` distinct device indices drawn uniformly.
pub fn random_anchors(m: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    check_count(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, m, n).into_vec())
}

fn sq_dist(data: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, c: usize) -> f64 {
    (0..data.ncols())
        .map(|k| (data[(i, k)] - centers[(c, k)]).powi(2))
        .sum()
}

fn nearest_center(data: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.nrows() {
        let d = sq_dist(data, i, centers, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

/// Lloyd's algorithm with k-means++ seeding. Returns the centers (one per
/// row) and each item's cluster.
pub fn kmeans(data: &DMatrix<f64>, k: usize, seed: u64) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let m = data.nrows();
    check_count(k, m)?;
    let p = data.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.gen_range(0..m)];
    let mut d2: Vec<f64> = (0..m)
        .map(|i| (data.row(i) - data.row(chosen[0])).norm_squared())
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = m - 1;
            for (i, w) in d2.iter().enumerate() {
                if *w > 0.0 && r < *w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            (0..m).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min((data.row(i) - data.row(next)).norm_squared());
        }
    }
    let mut centers = data.select_rows(&chosen);
    let mut labels: Vec<usize> = (0..m).map(|i| nearest_center(data, i, &centers)).collect();
    for _ in 0..300 {
        let mut sums = DMatrix::<f64>::zeros(k, p);
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for j in 0..p {
                sums[(c, j)] += data[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..p {
                    centers[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            }
        }
        let next: Vec<usize> = (0..m).map(|i| nearest_center(data, i, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok((centers, labels))
}

/// One anchor per k-means center: the item nearest to it, skipping items
/// already taken by an earlier center.
pub fn kmeans_anchors(data: &DMatrix<f64>, n: usize, seed: u64) -> Result<Vec<usize>> {
    let (centers, _) = kmeans(data, n, seed)?;
    let mut taken = vec![false; data.nrows()];
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, _) in taken.iter().enumerate().filter(|(_, &t)| !t) {
            let d = sq_dist(data, i, &centers, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        taken[best.0] = true;
        out.push(best.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_anchors_are_distinct_and_reproducible() {
        let a = random_anchors(100, 20, 3).unwrap();
        let mut s = a.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 20);
        assert_eq!(a, random_anchors(100, 20, 3).unwrap());
        assert!(random_anchors(5, 6, 0).is_err());
    }

    #[test]
    fn kmeans_separates_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = DMatrix::from_fn(90, 2, |i, _| (i / 30) as f64 * 10.0 + rng.gen::<f64>());
        let (_, labels) = kmeans(&data, 3, 7).unwrap();
        for blob in 0..3 {
            let l = labels[blob * 30];
            assert!(labels[blob * 30..(blob + 1) * 30].iter().all(|&x| x == l));
        }
        let anchors = kmeans_anchors(&data, 3, 7).unwrap();
        let mut blobs: Vec<usize> = anchors.iter().map(|a| a / 30).collect();
        blobs.sort_unstable();
        assert_eq!(blobs, vec![0, 1, 2]);
    }

    #[test]
    fn duplicated_items_still_give_distinct_anchors() {
        let data = DMatrix::from_element(6, 2, 1.0);
        let a = kmeans_anchors(&data, 4, 0).unwrap();
        let mut s = a.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 4);
    }
}
