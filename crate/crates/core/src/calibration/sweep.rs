use serde::{Deserialize, Serialize};

use super::localize::{localize_1nn, matching_loss};
use super::{calibrate, solve_calibration, SharedAnchors};
use crate::error::{Error, Result};
use crate::floorplan::Point;
use crate::metrics::median;
use crate::spectral::Embedding;

/// Everything a calibration needs apart from lambda.
#[derive(Clone, Copy)]
pub struct SweepInputs<'a> {
    pub signal_emb: &'a Embedding,
    pub area_emb: &'a Embedding,
    pub area_points: &'a [Point],
    pub anchors: &'a SharedAnchors,
    /// True anchor positions in anchor order; enables cross-validation.
    pub anchor_positions: Option<&'a [Point]>,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub loss: Option<f64>,
    /// Median held-out anchor error over all folds.
    pub cv_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Grid value with the smallest matching loss (first one on ties);
    /// `None` when every grid point failed.
    pub best_lambda: Option<f64>,
}

fn loss_at(inputs: &SweepInputs, lambda: f64) -> Result<f64> {
    let model = solve_calibration(
        inputs.signal_emb,
        inputs.area_emb,
        inputs.area_points,
        inputs.anchors,
        lambda,
    )?;
    matching_loss(inputs.area_emb, &calibrate(&model, inputs.signal_emb)?)
}

/// Anchors split round-robin into folds; each fold is predicted from a
/// calibration fitted on the others.
fn cv_error(inputs: &SweepInputs, positions: &[Point], lambda: f64) -> Result<f64> {
    let n = inputs.anchors.len();
    let folds = inputs.folds;
    let mut errors = Vec::with_capacity(n);
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|k| k % folds != f).collect();
        let held: Vec<usize> = (0..n).filter(|k| k % folds == f).collect();
        let sub = inputs.anchors.subset(&train)?;
        let model = solve_calibration(
            inputs.signal_emb,
            inputs.area_emb,
            inputs.area_points,
            &sub,
            lambda,
        )?;
        let rows: Vec<usize> = held.iter().map(|&k| inputs.anchors.signal()[k]).collect();
        let psi = inputs.signal_emb.select_rows(&rows) * model.c().transpose();
        let est = localize_1nn(&psi, inputs.area_emb, inputs.area_points)?;
        errors.extend(held.iter().zip(est).map(|(&k, e)| e.dist(&positions[k])));
    }
    Ok(median(&errors))
}

/// Fits and scores a calibration for each lambda. Failures are recorded in
/// the table rather than aborting the sweep.
pub fn sweep_lambda(inputs: &SweepInputs, grid: &[f64]) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("lambda grid is empty".into()));
    }
    let positions = inputs.anchor_positions.filter(|p| {
        inputs.folds >= 2
            && inputs.anchors.len() >= 2 * inputs.folds
            && p.len() == inputs.anchors.len()
    });
    let rows: Vec<SweepRow> = grid
        .iter()
        .map(|&lambda| match loss_at(inputs, lambda) {
            Ok(loss) => SweepRow {
                lambda,
                loss: Some(loss),
                cv_error: positions.and_then(|p| cv_error(inputs, p, lambda).ok()),
                error: None,
            },
            Err(e) => SweepRow {
                lambda,
                loss: None,
                cv_error: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let best_lambda = rows
        .iter()
        .filter_map(|r| r.loss.map(|l| (r.lambda, l)))
        .fold(None, |best: Option<(f64, f64)>, (lam, l)| match best {
            Some((_, bl)) if bl <= l => best,
            _ => Some((lam, l)),
        })
        .map(|(lam, _)| lam);
    Ok(SweepTable { rows, best_lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_emb(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Embedding {
        let mut ev: Vec<f64> = (0..cols).map(|_| rng.gen::<f64>()).collect();
        ev.sort_by(f64::total_cmp);
        Embedding::from_parts(
            DMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>() - 0.5),
            ev,
            true,
        )
        .unwrap()
    }

    #[test]
    fn single_value_grid_selects_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sig = random_emb(30, 4, &mut rng);
        let area = random_emb(30, 2, &mut rng);
        let pts: Vec<Point> = (0..30).map(|i| Point::new(i as f64, 0.0)).collect();
        let anchors = SharedAnchors::new((0..8).collect(), (0..8).collect()).unwrap();
        let inputs = SweepInputs {
            signal_emb: &sig,
            area_emb: &area,
            area_points: &pts,
            anchors: &anchors,
            anchor_positions: Some(&pts[..8]),
            folds: 4,
        };
        let t = sweep_lambda(&inputs, &[0.05]).unwrap();
        assert_eq!(t.best_lambda, Some(0.05));
        assert!(t.rows[0].cv_error.is_some());
        assert!(sweep_lambda(&inputs, &[]).is_err());
    }

    #[test]
    fn failures_are_recorded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sig = random_emb(20, 6, &mut rng);
        let area = random_emb(20, 2, &mut rng);
        let pts: Vec<Point> = (0..20).map(|i| Point::new(i as f64, 0.0)).collect();
        let anchors = SharedAnchors::new(vec![0, 1, 2], vec![0, 1, 2]).unwrap();
        let inputs = SweepInputs {
            signal_emb: &sig,
            area_emb: &area,
            area_points: &pts,
            anchors: &anchors,
            anchor_positions: None,
            folds: 5,
        };
        let t = sweep_lambda(&inputs, &[0.0, 0.1]).unwrap();
        assert!(t.rows[0].error.is_some());
        assert!(t.rows[1].loss.is_some());
        assert_eq!(t.best_lambda, Some(0.1));
    }

    #[test]
    fn regularizer_is_nonincreasing_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sig = random_emb(40, 5, &mut rng);
        let area = random_emb(40, 3, &mut rng);
        let pts: Vec<Point> = (0..40).map(|i| Point::new(i as f64, 0.0)).collect();
        let anchors =
            SharedAnchors::new((0..10).map(|i| 3 * i).collect(), (0..10).collect()).unwrap();
        let mut last = f64::INFINITY;
        for lambda in [0.0, 1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let m = solve_calibration(&sig, &area, &pts, &anchors, lambda).unwrap();
            let c = m.c();
            let reg: f64 = (0..3)
                .map(|r| {
                    (0..5)
                        .map(|k| sig.eigenvalues()[k] * c[(r, k)].powi(2))
                        .sum::<f64>()
                })
                .sum();
            assert!(reg <= last + 1e-12);
            last = reg;
        }
    }
}
