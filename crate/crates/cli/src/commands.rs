//! The subcommands. Each takes a parsed config, writes its output bundle,
//! and returns the headline numbers.

use mmloc_core::calibration::{
    calibrate, localize_1nn, solve_calibration, sweep_lambda, SweepInputs,
};
use mmloc_core::floorplan::{Point, Polygon, Segment};
use mmloc_core::metrics::{median, non_anchor_errors, pearson};
use mmloc_core::pipeline::{
    area_embedding, area_points, run_with_signal_embedding, select_anchors, signal_embedding,
};
use mmloc_core::synth::{build_signal_sets, generate_geodesic, generate_radial, SynthScenario};
use mmloc_core::{
    baseline_1nn, error_stats, ingest_rssi_dataset, load_corpus, AnchorMode, AreaMetric, Embedding,
    ErrorStats, FeatureMatrix, FloorPlan, Manifest, PipelineConfig, PipelineResult, Schema,
    SharedAnchors, SignalCorpus, Signals,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{
    AnchorConfig, GeodesicDemoConfig, IngestConfig, RunConfig, SynthConfig, SynthModel,
};
use crate::error::CliError;
use crate::output::{num, opt_num, Bundle};

/// Devices, their signals and what is known about their positions.
pub struct Prepared {
    pub plan: FloorPlan,
    pub ids: Vec<String>,
    pub signals: Signals,
    pub truth: Vec<Option<Point>>,
    pub anchors: Vec<usize>,
    pub anchor_positions: Vec<Point>,
    pub corpus_manifest: Manifest,
}

impl Prepared {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// True positions when every device has one.
    pub fn all_truth(&self) -> Option<Vec<Point>> {
        self.truth.iter().copied().collect()
    }

    fn anchor_set(&self) -> Result<SharedAnchors, CliError> {
        Ok(SharedAnchors::new(
            self.anchors.clone(),
            (0..self.anchors.len()).collect(),
        )?)
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_run_config(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.d == 0 || cfg.l == 0 {
        return Err(config_err("d and l must be at least 1"));
    }
    if cfg.anchors.count() == 0 {
        return Err(config_err("at least one anchor is required"));
    }
    if cfg.lambda.is_nan() || cfg.lambda < 0.0 {
        return Err(config_err(format!(
            "lambda must be nonnegative, got {}",
            cfg.lambda
        )));
    }
    for (name, p) in [("floor_plan", &cfg.floor_plan), ("corpus", &cfg.corpus)] {
        if !p.exists() {
            return Err(config_err(format!(
                "{name} file {} does not exist",
                p.display()
            )));
        }
    }
    Ok(())
}

fn anchor_mode(a: &AnchorConfig) -> AnchorMode {
    match a {
        AnchorConfig::Kmeans { .. } => AnchorMode::Kmeans,
        _ => AnchorMode::Random,
    }
}

/// Loads the plan and corpus, forms devices (signal sets if configured),
/// and picks the anchors.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    check_run_config(cfg)?;
    let plan = FloorPlan::load(&cfg.floor_plan)?;
    let corpus = load_corpus(&cfg.corpus, Schema::from_path(&cfg.corpus))?;
    let (ids, signals, truth) = match &cfg.signal_sets {
        None => {
            let ids: Vec<String> = corpus.ids().into_iter().map(String::from).collect();
            let truth: Vec<Option<Point>> = corpus.records().iter().map(|r| r.position).collect();
            (ids, Signals::Vectors(corpus.features()?), truth)
        }
        Some(sc) => {
            let raw = match corpus.features()? {
                FeatureMatrix::Real(m) => m,
                FeatureMatrix::Complex(_) => {
                    return Err(config_err("signal sets are built from real corpora only"))
                }
            };
            let locations = corpus
                .positions()
                .ok_or_else(|| config_err("signal sets need a position for every raw record"))?;
            let sets = build_signal_sets(&locations, &raw, sc.m, sc.k, sc.radius, sc.seed)?;
            let ids = sets
                .center_indices
                .iter()
                .map(|&i| corpus.records()[i].device_id.clone())
                .collect();
            let truth = sets.centers.iter().map(|&c| Some(c)).collect();
            (ids, Signals::Sets(sets.sets), truth)
        }
    };
    let m = ids.len();
    let n = cfg.anchors.count();
    if n >= m {
        return Err(config_err(format!(
            "anchor count {n} must be below the device count {m}"
        )));
    }
    let anchors = match &cfg.anchors {
        AnchorConfig::Explicit { ids: wanted } => {
            let lookup: std::collections::HashMap<&str, usize> = ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), i))
                .collect();
            wanted
                .iter()
                .map(|w| {
                    lookup
                        .get(w.as_str())
                        .copied()
                        .ok_or_else(|| config_err(format!("unknown anchor id '{w}'")))
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        other => select_anchors(&signals, anchor_mode(other), n, cfg.seed)?,
    };
    let anchor_positions = anchors
        .iter()
        .map(|&a| {
            truth[a].ok_or_else(|| {
                CliError::Core(mmloc_core::Error::InvalidData(format!(
                    "anchor '{}' has no known position",
                    ids[a]
                )))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared {
        plan,
        ids,
        signals,
        truth,
        anchors,
        anchor_positions,
        corpus_manifest: corpus.manifest().clone(),
    })
}

pub fn pipeline_config(cfg: &RunConfig, devices: usize) -> PipelineConfig {
    PipelineConfig {
        signal_kernel: cfg.signal_kernel.clone(),
        area_kernel: cfg.area_kernel.clone(),
        area_metric: cfg.area_metric,
        t: cfg.t.unwrap_or(devices),
        d: cfg.d,
        l: cfg.l,
        lambda: cfg.lambda,
        area_seed: cfg.area_seed.unwrap_or(cfg.seed),
    }
}

fn stats_for(
    estimates: &[Point],
    prep: &Prepared,
    anchors: &[usize],
) -> Result<Option<ErrorStats>, CliError> {
    match prep.all_truth() {
        Some(truth) => Ok(Some(error_stats(&non_anchor_errors(
            estimates, &truth, anchors,
        ))?)),
        None => Ok(None),
    }
}

/// Deterministic summary written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub devices: usize,
    pub anchors: usize,
    pub t: usize,
    pub d: usize,
    pub l: usize,
    pub lambda: f64,
    /// Error over non-anchor devices; absent without ground truth.
    pub manifold: Option<ErrorStats>,
    pub baseline: Option<ErrorStats>,
    /// Pearson r of each calibrated coordinate against true x and y.
    pub calibrated_correlation: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorVsN {
    pub n: usize,
    pub manifold_median: Option<f64>,
    pub baseline_median: Option<f64>,
    pub error: Option<String>,
}

pub struct RunOutcome {
    pub metrics: RunMetrics,
    pub result: PipelineResult,
    pub error_vs_n: Vec<ErrorVsN>,
}

fn estimate_rows(prep: &Prepared, estimates: &[Point], anchors: &[usize]) -> Vec<Vec<String>> {
    (0..prep.len())
        .map(|i| {
            let e = estimates[i];
            let t = prep.truth[i];
            vec![
                prep.ids[i].clone(),
                num(e.x),
                num(e.y),
                opt_num(t.map(|p| p.x)),
                opt_num(t.map(|p| p.y)),
                opt_num(t.map(|p| p.dist(&e))),
                (anchors.contains(&i) as u8).to_string(),
            ]
        })
        .collect()
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn with_columns(base: &[&str], prefix: &str, n: usize) -> Vec<String> {
    let mut h = header(base);
    h.extend((0..n).map(|j| format!("{prefix}{j}")));
    h
}

fn write_embedding_plots(
    bundle: &mut Bundle,
    prep: &Prepared,
    res: &PipelineResult,
) -> Result<(), CliError> {
    let sig = res.signal_embedding.vectors();
    bundle.write_csv(
        "plot_signal_eigenvectors.csv",
        &with_columns(&["device_id", "x", "y"], "u", sig.ncols()),
        (0..prep.len()).map(|i| {
            let t = prep.truth[i];
            let mut row = vec![
                prep.ids[i].clone(),
                opt_num(t.map(|p| p.x)),
                opt_num(t.map(|p| p.y)),
            ];
            row.extend(sig.row(i).iter().map(|&v| num(v)));
            row
        }),
    )?;
    let area = res.area_embedding().vectors();
    bundle.write_csv(
        "plot_area_eigenvectors.csv",
        &with_columns(&["id", "x", "y"], "u", area.ncols()),
        res.area_points.iter().enumerate().map(|(i, p)| {
            let mut row = vec![i.to_string(), num(p.x), num(p.y)];
            row.extend(area.row(i).iter().map(|&v| num(v)));
            row
        }),
    )?;
    bundle.write_csv(
        "plot_calibrated.csv",
        &with_columns(&["device_id", "x", "y"], "psi", res.psi.ncols()),
        (0..prep.len()).map(|i| {
            let t = prep.truth[i];
            let mut row = vec![
                prep.ids[i].clone(),
                opt_num(t.map(|p| p.x)),
                opt_num(t.map(|p| p.y)),
            ];
            row.extend(res.psi.row(i).iter().map(|&v| num(v)));
            row
        }),
    )?;
    Ok(())
}

fn correlations(psi: &nalgebra::DMatrix<f64>, truth: &[Point]) -> Vec<[f64; 2]> {
    let xs: Vec<f64> = truth.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = truth.iter().map(|p| p.y).collect();
    (0..psi.ncols())
        .map(|c| {
            let col: Vec<f64> = psi.column(c).iter().copied().collect();
            [pearson(&col, &xs), pearson(&col, &ys)]
        })
        .collect()
}

fn error_vs_n(cfg: &RunConfig, prep: &Prepared, signal_emb: &Embedding) -> Vec<ErrorVsN> {
    let Some(truth) = prep.all_truth() else {
        return Vec::new();
    };
    let pcfg = pipeline_config(cfg, prep.len());
    cfg.error_vs_n
        .iter()
        .filter(|&&n| n >= 1 && n < prep.len() && n < pcfg.t)
        .map(|&n| {
            let attempt = || -> Result<(f64, f64), CliError> {
                let anchors =
                    select_anchors(&prep.signals, anchor_mode(&cfg.anchors), n, cfg.seed)?;
                let pos: Vec<Point> = anchors.iter().map(|&a| truth[a]).collect();
                let res = run_with_signal_embedding(
                    &prep.plan,
                    signal_emb.clone(),
                    &anchors,
                    &pos,
                    &pcfg,
                )?;
                let base = baseline_1nn(&prep.signals, &cfg.signal_kernel, &anchors, &pos)?;
                Ok((
                    median(&non_anchor_errors(&res.estimates, &truth, &anchors)),
                    median(&non_anchor_errors(&base, &truth, &anchors)),
                ))
            };
            match attempt() {
                Ok((mm, b)) => ErrorVsN {
                    n,
                    manifold_median: Some(mm),
                    baseline_median: Some(b),
                    error: None,
                },
                Err(e) => ErrorVsN {
                    n,
                    manifold_median: None,
                    baseline_median: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

fn corpus_inputs(prep: Option<&Prepared>) -> Value {
    match prep {
        Some(p) => {
            json!({ "corpus_manifest": p.corpus_manifest, "anchor_ids": p.anchors.iter().map(|&a| &p.ids[a]).collect::<Vec<_>>() })
        }
        None => Value::Null,
    }
}

/// Runs the full method and writes estimates, metrics, embeddings, the
/// model and plot data.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let config = serde_json::to_value(cfg)?;
    let mut bundle = Bundle::create(&cfg.output_dir)?;
    let mut prepared = None;
    match run_inner(cfg, &mut bundle, &mut prepared) {
        Ok(out) => {
            bundle.finish("run", &config, corpus_inputs(prepared.as_ref()))?;
            Ok(out)
        }
        Err(e) => Err(bundle.fail("run", &config, corpus_inputs(prepared.as_ref()), e)),
    }
}

fn run_inner(
    cfg: &RunConfig,
    bundle: &mut Bundle,
    prepared: &mut Option<Prepared>,
) -> Result<RunOutcome, CliError> {
    let prep = prepared.insert(prepare(cfg)?);
    let pcfg = pipeline_config(cfg, prep.len());
    let signal_emb = signal_embedding(&prep.signals, &pcfg.signal_kernel, pcfg.d)?;
    signal_emb.save(bundle.path("signal_embedding.csv"))?;
    bundle.path("signal_embedding.csv.json");
    let result = run_with_signal_embedding(
        &prep.plan,
        signal_emb.clone(),
        &prep.anchors,
        &prep.anchor_positions,
        &pcfg,
    )?;
    result.model.save(bundle.dir().join("model"))?;
    for f in [
        "model/model.json",
        "model/area_embedding.csv",
        "model/area_embedding.csv.json",
        "model/area_points.csv",
    ] {
        bundle.path(f);
    }
    bundle.write_csv(
        "estimates.csv",
        &header(&["device_id", "x_hat", "y_hat", "x", "y", "error", "anchor"]),
        estimate_rows(prep, &result.estimates, &prep.anchors),
    )?;
    write_embedding_plots(bundle, prep, &result)?;

    let baseline = baseline_1nn(
        &prep.signals,
        &cfg.signal_kernel,
        &prep.anchors,
        &prep.anchor_positions,
    )?;
    let curve = error_vs_n(cfg, prep, &signal_emb);
    if !curve.is_empty() {
        bundle.write_csv(
            "plot_error_vs_n.csv",
            &header(&["n", "manifold_median", "baseline_median", "error"]),
            curve.iter().map(|r| {
                vec![
                    r.n.to_string(),
                    opt_num(r.manifold_median),
                    opt_num(r.baseline_median),
                    r.error.clone().unwrap_or_default(),
                ]
            }),
        )?;
    }
    let metrics = RunMetrics {
        devices: prep.len(),
        anchors: prep.anchors.len(),
        t: pcfg.t,
        d: pcfg.d,
        l: pcfg.l,
        lambda: pcfg.lambda,
        manifold: stats_for(&result.estimates, prep, &prep.anchors)?,
        baseline: stats_for(&baseline, prep, &prep.anchors)?,
        calibrated_correlation: prep.all_truth().map(|t| correlations(&result.psi, &t)),
    };
    bundle.write_json("metrics.json", &metrics)?;
    Ok(RunOutcome {
        metrics,
        result,
        error_vs_n: curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub devices: usize,
    pub anchors: usize,
    pub baseline: Option<ErrorStats>,
}

/// Labeled-only nearest-neighbour baseline under the signal kernel.
pub fn cmd_baseline(cfg: &RunConfig) -> Result<BaselineMetrics, CliError> {
    let config = serde_json::to_value(cfg)?;
    let mut bundle = Bundle::create(&cfg.output_dir)?;
    let mut prepared = None;
    let mut inner = || -> Result<BaselineMetrics, CliError> {
        let prep = prepared.insert(prepare(cfg)?);
        let est = baseline_1nn(
            &prep.signals,
            &cfg.signal_kernel,
            &prep.anchors,
            &prep.anchor_positions,
        )?;
        bundle.write_csv(
            "baseline_estimates.csv",
            &header(&["device_id", "x_hat", "y_hat", "x", "y", "error", "anchor"]),
            estimate_rows(prep, &est, &prep.anchors),
        )?;
        let m = BaselineMetrics {
            devices: prep.len(),
            anchors: prep.anchors.len(),
            baseline: stats_for(&est, prep, &prep.anchors)?,
        };
        bundle.write_json("baseline_metrics.json", &m)?;
        Ok(m)
    };
    match inner() {
        Ok(m) => {
            bundle.finish("baseline", &config, corpus_inputs(prepared.as_ref()))?;
            Ok(m)
        }
        Err(e) => Err(bundle.fail("baseline", &config, corpus_inputs(prepared.as_ref()), e)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub d: usize,
    pub lambda: f64,
    pub loss: Option<f64>,
    pub cv_error: Option<f64>,
    /// Median non-anchor error, when ground truth is known.
    pub true_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    /// (d, lambda) with the smallest matching loss.
    pub selected_d: Option<usize>,
    pub selected_lambda: Option<f64>,
}

/// Matching-loss selection of lambda, optionally crossed with d.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepOutcome, CliError> {
    let config = serde_json::to_value(cfg)?;
    if !cfg.sweep.l_grid.is_empty() {
        return Err(config_err(
            "l cannot be selected by matching loss (the loss grows with l); remove sweep.l_grid and set l directly",
        ));
    }
    if cfg.sweep.lambdas.is_empty() {
        return Err(config_err("sweep.lambdas is empty"));
    }
    let mut bundle = Bundle::create(&cfg.output_dir)?;
    let mut prepared = None;
    let mut inner = || -> Result<SweepOutcome, CliError> {
        let prep = prepared.insert(prepare(cfg)?);
        let d_grid = if cfg.sweep.d_grid.is_empty() {
            vec![cfg.d]
        } else {
            cfg.sweep.d_grid.clone()
        };
        if d_grid.contains(&0) {
            return Err(config_err("d_grid values must be at least 1"));
        }
        let d_max = *d_grid.iter().max().unwrap_or(&cfg.d);
        let pcfg = pipeline_config(cfg, prep.len());
        let full = signal_embedding(&prep.signals, &pcfg.signal_kernel, d_max)?;
        let points = area_points(&prep.plan, &prep.anchor_positions, pcfg.t, pcfg.area_seed)?;
        let area_emb = area_embedding(
            &prep.plan,
            &points,
            &pcfg.area_kernel,
            pcfg.area_metric,
            pcfg.l,
        )?;
        let anchors = prep.anchor_set()?;
        let truth = prep.all_truth();
        let mut out = Vec::new();
        for &d in &d_grid {
            let emb = full.truncate(d)?;
            let inputs = SweepInputs {
                signal_emb: &emb,
                area_emb: &area_emb,
                area_points: &points,
                anchors: &anchors,
                anchor_positions: Some(&prep.anchor_positions),
                folds: cfg.sweep.folds,
            };
            let table = sweep_lambda(&inputs, &cfg.sweep.lambdas)?;
            for row in table.rows {
                let true_error = match (&truth, row.loss) {
                    (Some(t), Some(_)) => {
                        let model =
                            solve_calibration(&emb, &area_emb, &points, &anchors, row.lambda)?;
                        let est = localize_1nn(&calibrate(&model, &emb)?, &area_emb, &points)?;
                        Some(median(&non_anchor_errors(&est, t, &prep.anchors)))
                    }
                    _ => None,
                };
                out.push(SweepPoint {
                    d,
                    lambda: row.lambda,
                    loss: row.loss,
                    cv_error: row.cv_error,
                    true_error,
                    error: row.error,
                });
            }
        }
        let best = out.iter().filter_map(|p| p.loss.map(|l| (p, l))).fold(
            None,
            |acc: Option<(&SweepPoint, f64)>, (p, l)| match acc {
                Some((_, bl)) if bl <= l => acc,
                _ => Some((p, l)),
            },
        );
        let outcome = SweepOutcome {
            selected_d: best.map(|(p, _)| p.d),
            selected_lambda: best.map(|(p, _)| p.lambda),
            points: out,
        };
        bundle.write_csv(
            "sweep.csv",
            &header(&[
                "d",
                "lambda",
                "matching_loss",
                "cv_error",
                "true_error",
                "error",
            ]),
            outcome.points.iter().map(|p| {
                vec![
                    p.d.to_string(),
                    num(p.lambda),
                    opt_num(p.loss),
                    opt_num(p.cv_error),
                    opt_num(p.true_error),
                    p.error.clone().unwrap_or_default(),
                ]
            }),
        )?;
        bundle.write_json(
            "selected.json",
            &json!({ "d": outcome.selected_d, "lambda": outcome.selected_lambda }),
        )?;
        Ok(outcome)
    };
    match inner() {
        Ok(o) => {
            bundle.finish("sweep", &config, corpus_inputs(prepared.as_ref()))?;
            Ok(o)
        }
        Err(e) => Err(bundle.fail("sweep", &config, corpus_inputs(prepared.as_ref()), e)),
    }
}

fn unit_square() -> Result<FloorPlan, CliError> {
    Ok(FloorPlan::rectangle(0.0, 0.0, 1.0, 1.0)?)
}

/// Generates a synthetic corpus and writes it with its floor plan.
pub fn cmd_synth(cfg: &SynthConfig) -> Result<SignalCorpus, CliError> {
    let config = serde_json::to_value(cfg)?;
    let mut bundle = Bundle::create(&cfg.output_dir)?;
    let inner = |bundle: &mut Bundle| -> Result<SignalCorpus, CliError> {
        let plan = match &cfg.floor_plan {
            Some(p) => FloorPlan::load(p)?,
            None => unit_square()?,
        };
        let r0 = Point::new(cfg.r0[0], cfg.r0[1]);
        let scenario = SynthScenario::new(plan.clone(), r0, cfg.p, cfg.m, cfg.nuisance, cfg.seed)?;
        let resolution = cfg.resolution.unwrap_or_else(|| plan.default_resolution());
        let data = match cfg.model {
            SynthModel::Radial => generate_radial(&scenario)?,
            SynthModel::Geodesic => generate_geodesic(&scenario, resolution)?,
        };
        let mut params = Map::new();
        params.insert("generator".into(), serde_json::to_value(cfg.model)?);
        params.insert("scenario".into(), serde_json::to_value(scenario.record())?);
        if cfg.model == SynthModel::Geodesic {
            params.insert("resolution".into(), Value::from(resolution));
        }
        let corpus = SignalCorpus::from_features(&data.signals, Some(&data.locations), params)?;
        corpus.save(bundle.path("corpus.csv"))?;
        bundle.path("corpus.csv.json");
        plan.save(bundle.path("floor_plan.json"))?;
        Ok(corpus)
    };
    match inner(&mut bundle) {
        Ok(c) => {
            bundle.finish("synth", &config, Value::Null)?;
            Ok(c)
        }
        Err(e) => Err(bundle.fail("synth", &config, Value::Null, e)),
    }
}

pub fn cmd_ingest(cfg: &IngestConfig) -> Result<SignalCorpus, CliError> {
    let config = serde_json::to_value(cfg)?;
    if !cfg.input.exists() {
        return Err(config_err(format!(
            "input file {} does not exist",
            cfg.input.display()
        )));
    }
    let mut bundle = Bundle::create(&cfg.output_dir)?;
    let inner = |bundle: &mut Bundle| -> Result<SignalCorpus, CliError> {
        let corpus = ingest_rssi_dataset(&cfg.input, &cfg.options)?;
        corpus.save(bundle.path("corpus.csv"))?;
        bundle.path("corpus.csv.json");
        Ok(corpus)
    };
    match inner(&mut bundle) {
        Ok(c) => {
            bundle.finish("ingest", &config, Value::Null)?;
            Ok(c)
        }
        Err(e) => Err(bundle.fail("ingest", &config, Value::Null, e)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRow {
    pub seed: u64,
    pub geodesic_median: f64,
    pub euclidean_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoOutcome {
    pub rows: Vec<DemoRow>,
    /// Seeds where the geodesic area graph gives strictly lower error.
    pub geodesic_wins: usize,
}

pub fn demo_plan(cfg: &GeodesicDemoConfig) -> Result<FloorPlan, CliError> {
    let walls = cfg
        .walls
        .iter()
        .map(|w| Segment::new(Point::new(w[0][0], w[0][1]), Point::new(w[1][0], w[1][1])))
        .collect();
    Ok(FloorPlan::new(
        Polygon::rect(0.0, 0.0, 1.0, 1.0),
        vec![],
        walls,
    )?)
}

/// One seed of the wall experiment: signals decay with the obstacle-aware
/// distance; the same pipeline runs with a geodesic and with a Euclidean
/// area graph.
pub fn demo_seed(
    cfg: &GeodesicDemoConfig,
    plan: &FloorPlan,
    seed: u64,
) -> Result<DemoRow, CliError> {
    let scenario = SynthScenario::new(plan.clone(), cfg.receiver(), cfg.p, cfg.m, None, seed)?;
    let data = generate_geodesic(&scenario, cfg.resolution)?;
    let signals = Signals::Vectors(data.signals);
    let anchors = select_anchors(&signals, AnchorMode::Kmeans, cfg.n, seed)?;
    let pos: Vec<Point> = anchors.iter().map(|&a| data.locations[a]).collect();
    let signal_emb = signal_embedding(&signals, &cfg.kernel, cfg.d)?;
    let mut medians = [0.0; 2];
    let metrics = [
        AreaMetric::Geodesic {
            resolution: cfg.resolution,
        },
        AreaMetric::Euclidean,
    ];
    for (slot, metric) in medians.iter_mut().zip(metrics) {
        let pcfg = PipelineConfig {
            signal_kernel: cfg.kernel.clone(),
            area_kernel: cfg.kernel.clone(),
            area_metric: metric,
            t: cfg.t,
            d: cfg.d,
            l: cfg.l,
            lambda: cfg.lambda,
            area_seed: seed,
        };
        let res = run_with_signal_embedding(plan, signal_emb.clone(), &anchors, &pos, &pcfg)?;
        *slot = median(&non_anchor_errors(
            &res.estimates,
            &data.locations,
            &anchors,
        ));
    }
    Ok(DemoRow {
        seed,
        geodesic_median: medians[0],
        euclidean_median: medians[1],
    })
}

pub fn cmd_geodesic_demo(cfg: &GeodesicDemoConfig) -> Result<DemoOutcome, CliError> {
    let config = serde_json::to_value(cfg)?;
    if cfg.seeds.is_empty() {
        return Err(config_err("seeds is empty"));
    }
    let mut bundle = Bundle::create(&cfg.output_dir)?;
    let inner = |bundle: &mut Bundle| -> Result<DemoOutcome, CliError> {
        let plan = demo_plan(cfg)?;
        plan.save(bundle.path("floor_plan.json"))?;
        let rows = cfg
            .seeds
            .iter()
            .map(|&s| demo_seed(cfg, &plan, s))
            .collect::<Result<Vec<_>, _>>()?;
        let wins = rows
            .iter()
            .filter(|r| r.geodesic_median < r.euclidean_median)
            .count();
        bundle.write_csv(
            "geodesic_demo.csv",
            &header(&["seed", "geodesic_median", "euclidean_median"]),
            rows.iter().map(|r| {
                vec![
                    r.seed.to_string(),
                    num(r.geodesic_median),
                    num(r.euclidean_median),
                ]
            }),
        )?;
        let out = DemoOutcome {
            rows,
            geodesic_wins: wins,
        };
        bundle.write_json("summary.json", &out)?;
        Ok(out)
    };
    match inner(&mut bundle) {
        Ok(o) => {
            bundle.finish("geodesic-demo", &config, Value::Null)?;
            Ok(o)
        }
        Err(e) => Err(bundle.fail("geodesic-demo", &config, Value::Null, e)),
    }
}
