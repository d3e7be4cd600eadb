//! End-to-end localization: embed the signal graph and an area graph over
//! the floor plan, fit the calibration on the anchors, and read positions
//! off the nearest calibrated area points.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{
    calibrate, kmeans_anchors, localize_1nn, random_anchors, solve_calibration, CalibrationModel,
    SharedAnchors,
};
use crate::error::{Error, ErrorKind};
use crate::floorplan::{geodesic_distances, sample_uniform, FloorPlan, Point};
use crate::graphkernels::{FeatureMatrix, KernelSpec, Signals};
use crate::spectral::{embed, normalized_laplacian, Embedding};
use crate::synth::median_signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Anchors,
    AreaSampling,
    AreaGraph,
    AreaEmbedding,
    SignalGraph,
    SignalEmbedding,
    Calibration,
    Localization,
    Baseline,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok();
        write!(
            f,
            "{}",
            s.as_ref().and_then(|v| v.as_str()).unwrap_or("unknown")
        )
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn kind(&self) -> ErrorKind {
        self.source.kind()
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T> AtStage<T> for crate::error::Result<T> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Distance used between area points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AreaMetric {
    Euclidean,
    Geodesic { resolution: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMode {
    Random,
    /// Devices nearest the k-means centers of the signal features.
    Kmeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub signal_kernel: KernelSpec,
    pub area_kernel: KernelSpec,
    pub area_metric: AreaMetric,
    /// Area points, anchors included.
    pub t: usize,
    pub d: usize,
    pub l: usize,
    pub lambda: f64,
    pub area_seed: u64,
}

/// One real row per device for clustering: the features themselves,
/// (re, im) pairs for complex features, or the per-set median of the real
/// and imaginary parts.
pub fn clustering_features(signals: &Signals) -> crate::error::Result<DMatrix<f64>> {
    match signals {
        Signals::Vectors(FeatureMatrix::Real(m)) => Ok(m.clone()),
        Signals::Vectors(FeatureMatrix::Complex(m)) => {
            Ok(DMatrix::from_fn(m.nrows(), 2 * m.ncols(), |i, j| {
                let c = m[(i, j / 2)];
                if j % 2 == 0 {
                    c.re
                } else {
                    c.im
                }
            }))
        }
        Signals::Sets(sets) => {
            let p = sets.first().map_or(0, |s| s.ncols());
            let mut out = DMatrix::zeros(sets.len(), 2 * p);
            for (i, s) in sets.iter().enumerate() {
                if s.ncols() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "signal set {i} has {} columns, expected {p}",
                        s.ncols()
                    )));
                }
                let re = median_signal(&s.map(|c| c.re))?;
                let im = median_signal(&s.map(|c| c.im))?;
                for j in 0..p {
                    out[(i, j)] = re[j];
                    out[(i, p + j)] = im[j];
                }
            }
            Ok(out)
        }
    }
}

pub fn select_anchors(
    signals: &Signals,
    mode: AnchorMode,
    n: usize,
    seed: u64,
) -> StageResult<Vec<usize>> {
    match mode {
        AnchorMode::Random => random_anchors(signals.len(), n, seed),
        AnchorMode::Kmeans => {
            clustering_features(signals).and_then(|f| kmeans_anchors(&f, n, seed))
        }
    }
    .at(Stage::Anchors)
}

pub fn signal_embedding(
    signals: &Signals,
    kernel: &KernelSpec,
    d: usize,
) -> StageResult<Embedding> {
    let graph = kernel.build_graph(signals).at(Stage::SignalGraph)?;
    let lap = normalized_laplacian(&graph).at(Stage::SignalGraph)?;
    embed(&lap, d, true).at(Stage::SignalEmbedding)
}

/// Area points: the anchor positions first, then `t - n` uniform samples.
pub fn area_points(
    plan: &FloorPlan,
    anchor_positions: &[Point],
    t: usize,
    seed: u64,
) -> StageResult<Vec<Point>> {
    let n = anchor_positions.len();
    if t <= n {
        return Err(StageError {
            stage: Stage::AreaSampling,
            source: Error::InvalidParameter(format!("T = {t} must exceed the anchor count {n}")),
        });
    }
    if let Some(i) = anchor_positions.iter().position(|p| !plan.contains(p)) {
        return Err(StageError {
            stage: Stage::AreaSampling,
            source: Error::InvalidData(format!("anchor {i} lies outside the floor plan")),
        });
    }
    let sample = sample_uniform(plan, t - n, seed).at(Stage::AreaSampling)?;
    Ok(anchor_positions
        .iter()
        .copied()
        .chain(sample.points)
        .collect())
}

pub fn area_sq_distances(
    plan: &FloorPlan,
    points: &[Point],
    metric: AreaMetric,
) -> crate::error::Result<DMatrix<f64>> {
    match metric {
        AreaMetric::Euclidean => Ok(DMatrix::from_fn(points.len(), points.len(), |i, j| {
            points[i].dist_sq(&points[j])
        })),
        AreaMetric::Geodesic { resolution } => {
            let d = geodesic_distances(plan, points, resolution)?;
            if let Some(k) = d.iter().position(|v| !v.is_finite()) {
                let n = points.len();
                return Err(Error::Unreachable(format!(
                    "area points {} and {} are disconnected",
                    k % n,
                    k / n
                )));
            }
            Ok(d.map(|v| v * v))
        }
    }
}

pub fn area_embedding(
    plan: &FloorPlan,
    points: &[Point],
    kernel: &KernelSpec,
    metric: AreaMetric,
    l: usize,
) -> StageResult<Embedding> {
    let sq = area_sq_distances(plan, points, metric).at(Stage::AreaGraph)?;
    let graph = kernel.graph_from_sq_distances(&sq).at(Stage::AreaGraph)?;
    let lap = normalized_laplacian(&graph).at(Stage::AreaGraph)?;
    embed(&lap, l, true).at(Stage::AreaEmbedding)
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub signal_embedding: Embedding,
    pub area_points: Vec<Point>,
    pub anchors: SharedAnchors,
    pub model: CalibrationModel,
    /// Calibrated signal coordinates, M x l.
    pub psi: DMatrix<f64>,
    pub estimates: Vec<Point>,
}

impl PipelineResult {
    pub fn area_embedding(&self) -> &Embedding {
        self.model.area_embedding()
    }
}

/// Runs the whole method. `anchors` index devices; `anchor_positions`
/// holds their known positions in the same order.
pub fn run_pipeline(
    plan: &FloorPlan,
    signals: &Signals,
    anchors: &[usize],
    anchor_positions: &[Point],
    cfg: &PipelineConfig,
) -> StageResult<PipelineResult> {
    let signal_emb = signal_embedding(signals, &cfg.signal_kernel, cfg.d)?;
    run_with_signal_embedding(plan, signal_emb, anchors, anchor_positions, cfg)
}

/// As [`run_pipeline`] with the signal embedding already computed (it does
/// not depend on the anchors).
pub fn run_with_signal_embedding(
    plan: &FloorPlan,
    signal_emb: Embedding,
    anchors: &[usize],
    anchor_positions: &[Point],
    cfg: &PipelineConfig,
) -> StageResult<PipelineResult> {
    if anchors.len() != anchor_positions.len() {
        return Err(StageError {
            stage: Stage::Anchors,
            source: Error::DimensionMismatch(format!(
                "{} anchors with {} positions",
                anchors.len(),
                anchor_positions.len()
            )),
        });
    }
    let signal_emb = if signal_emb.dim() > cfg.d {
        signal_emb.truncate(cfg.d).at(Stage::SignalEmbedding)?
    } else {
        signal_emb
    };
    let points = area_points(plan, anchor_positions, cfg.t, cfg.area_seed)?;
    let area_emb = area_embedding(plan, &points, &cfg.area_kernel, cfg.area_metric, cfg.l)?;
    let shared =
        SharedAnchors::new(anchors.to_vec(), (0..anchors.len()).collect()).at(Stage::Anchors)?;
    let model = solve_calibration(&signal_emb, &area_emb, &points, &shared, cfg.lambda)
        .at(Stage::Calibration)?;
    let psi = calibrate(&model, &signal_emb).at(Stage::Localization)?;
    let estimates =
        localize_1nn(&psi, model.area_embedding(), model.area_points()).at(Stage::Localization)?;
    Ok(PipelineResult {
        signal_embedding: signal_emb,
        area_points: points,
        anchors: shared,
        model,
        psi,
        estimates,
    })
}

/// Labeled-only baseline: every device takes the position of the anchor
/// it is most similar to under the graph kernel; anchors keep their own.
pub fn baseline_1nn(
    signals: &Signals,
    kernel: &KernelSpec,
    anchors: &[usize],
    anchor_positions: &[Point],
) -> StageResult<Vec<Point>> {
    let fail = |source| StageError {
        stage: Stage::Baseline,
        source,
    };
    if anchors.is_empty() || anchors.len() != anchor_positions.len() {
        return Err(fail(Error::InvalidParameter(format!(
            "{} anchors with {} positions",
            anchors.len(),
            anchor_positions.len()
        ))));
    }
    if let Some(&a) = anchors.iter().find(|&&a| a >= signals.len()) {
        return Err(fail(Error::InvalidParameter(format!(
            "anchor {a} out of range"
        ))));
    }
    let sim = kernel.similarity_matrix(signals).at(Stage::Baseline)?;
    let mut out = Vec::with_capacity(signals.len());
    for i in 0..signals.len() {
        if let Some(k) = anchors.iter().position(|&a| a == i) {
            out.push(anchor_positions[k]);
            continue;
        }
        let scores = DVector::from_iterator(anchors.len(), anchors.iter().map(|&a| sim[(i, a)]));
        let mut best = 0;
        for k in 1..scores.len() {
            if scores[k] > scores[best] {
                best = k;
            }
        }
        out.push(anchor_positions[best]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{median, non_anchor_errors};
    use crate::synth::{generate_radial, SynthScenario};

    fn square_cfg(t: usize) -> PipelineConfig {
        PipelineConfig {
            signal_kernel: KernelSpec::SelfTuning { k: 10 },
            area_kernel: KernelSpec::NormalizedGaussian { k: 10, sigma: None },
            area_metric: AreaMetric::Euclidean,
            t,
            d: 8,
            l: 2,
            lambda: 0.01,
            area_seed: 1,
        }
    }

    #[test]
    fn area_points_start_with_anchors() {
        let plan = FloorPlan::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let a = [Point::new(0.2, 0.3), Point::new(0.9, 0.1)];
        let pts = area_points(&plan, &a, 10, 0).unwrap();
        assert_eq!(pts.len(), 10);
        assert_eq!(&pts[..2], &a);
        let e = area_points(&plan, &a, 2, 0).unwrap_err();
        assert_eq!(e.stage, Stage::AreaSampling);
        assert!(area_points(&plan, &[Point::new(2.0, 2.0)], 5, 0).is_err());
    }

    #[test]
    fn stage_names_appear_in_errors() {
        let e = StageError {
            stage: Stage::SignalEmbedding,
            source: Error::Disconnected,
        };
        assert!(e.to_string().starts_with("signal_embedding stage failed"));
        assert_eq!(e.kind(), ErrorKind::Numerical);
    }

    #[test]
    fn small_square_localizes() {
        let plan = FloorPlan::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let s = SynthScenario::new(plan.clone(), Point::new(-2.0, -2.0), 20, 300, None, 0).unwrap();
        let data = generate_radial(&s).unwrap();
        let signals = Signals::Vectors(data.signals);
        let anchors = select_anchors(&signals, AnchorMode::Kmeans, 20, 0).unwrap();
        let pos: Vec<Point> = anchors.iter().map(|&a| data.locations[a]).collect();
        let res = run_pipeline(&plan, &signals, &anchors, &pos, &square_cfg(300)).unwrap();
        let err = median(&non_anchor_errors(
            &res.estimates,
            &data.locations,
            &anchors,
        ));
        assert!(err < 0.15, "median error {err}");
        let base =
            baseline_1nn(&signals, &KernelSpec::SelfTuning { k: 10 }, &anchors, &pos).unwrap();
        assert!(anchors.iter().all(|&a| base[a] == data.locations[a]));
    }

    #[test]
    fn baseline_single_anchor_and_identical_signal() {
        let f = FeatureMatrix::real(DMatrix::from_row_slice(
            5,
            2,
            &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 3.0, 3.0, 1.0, 0.0],
        ))
        .unwrap();
        let signals = Signals::Vectors(f);
        let kernel = KernelSpec::NormalizedGaussian { k: 2, sigma: None };
        let one = baseline_1nn(&signals, &kernel, &[3], &[Point::new(7.0, 7.0)]).unwrap();
        assert!(one.iter().all(|p| *p == Point::new(7.0, 7.0)));
        // device 4 repeats anchor 1's signal
        let est = baseline_1nn(
            &signals,
            &kernel,
            &[0, 1],
            &[Point::new(0.0, 0.0), Point::new(5.0, 5.0)],
        )
        .unwrap();
        assert_eq!(est[4], Point::new(5.0, 5.0));
    }

    #[test]
    fn clustering_features_for_sets_use_medians() {
        use nalgebra::Complex;
        let s = DMatrix::from_row_slice(
            3,
            1,
            &[
                Complex::new(1.0, 0.0),
                Complex::new(5.0, 2.0),
                Complex::new(9.0, -1.0),
            ],
        );
        let f = clustering_features(&Signals::Sets(vec![s])).unwrap();
        assert_eq!(f.row(0).iter().copied().collect::<Vec<_>>(), vec![5.0, 0.0]);
    }
}
