//! Synthetic signal corpora: inverse-square decay of a random linear map of
//! position, with optional per-device gains, and the signal-set protocol.

use nalgebra::{Complex, DMatrix};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floorplan::{sample_with_rng, FloorPlan, GeodesicField, Point};
use crate::graphkernels::{FeatureMatrix, SignalSet};

const STREAM_MIXING: u64 = 0;
const STREAM_LOCATIONS: u64 = 1;
const STREAM_GAINS: u64 = 2;

/// Range of the log-uniform per-device gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainRange {
    pub min: f64,
    pub max: f64,
}

impl Default for GainRange {
    fn default() -> Self {
        Self { min: 0.5, max: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScenario {
    pub plan: FloorPlan,
    /// Receiver position; may lie outside the plan.
    pub r0: Point,
    /// p x 2 mixing matrix.
    pub b: DMatrix<f64>,
    pub m: usize,
    pub nuisance: Option<GainRange>,
    pub seed: u64,
}

/// Scenario parameters as recorded in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub r0: Point,
    pub p: usize,
    pub m: usize,
    pub seed: u64,
    pub nuisance: Option<GainRange>,
    /// Rows of B.
    pub b: Vec<[f64; 2]>,
}

impl SynthScenario {
    /// Scenario with `B` drawn i.i.d. standard normal from the seed.
    pub fn new(
        plan: FloorPlan,
        r0: Point,
        p: usize,
        m: usize,
        nuisance: Option<GainRange>,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_MIXING);
        let b = DMatrix::from_fn(p.max(1), 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self::with_mixing(plan, r0, b, m, nuisance, seed)
    }

    pub fn with_mixing(
        plan: FloorPlan,
        r0: Point,
        b: DMatrix<f64>,
        m: usize,
        nuisance: Option<GainRange>,
        seed: u64,
    ) -> Result<Self> {
        let p = b.nrows();
        if p < 2 || b.ncols() != 2 {
            return Err(Error::InvalidParameter(format!(
                "B must be p x 2 with p >= 2, got {}x{}",
                p,
                b.ncols()
            )));
        }
        let sv = b.clone().singular_values();
        if sv.min().is_nan() || sv.min() <= 1e-12 * sv.max() {
            return Err(Error::InvalidParameter(
                "B must have full column rank".into(),
            ));
        }
        if m == 0 {
            return Err(Error::InvalidParameter(
                "device count must be positive".into(),
            ));
        }
        if !r0.is_finite() {
            return Err(Error::InvalidParameter(
                "receiver position must be finite".into(),
            ));
        }
        if let Some(g) = nuisance {
            if !(g.min > 0.0 && g.max >= g.min && g.max.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "gain range [{}, {}] is invalid",
                    g.min, g.max
                )));
            }
        }
        Ok(Self {
            plan,
            r0,
            b,
            m,
            nuisance,
            seed,
        })
    }

    pub fn p(&self) -> usize {
        self.b.nrows()
    }

    pub fn record(&self) -> ScenarioRecord {
        ScenarioRecord {
            r0: self.r0,
            p: self.p(),
            m: self.m,
            seed: self.seed,
            nuisance: self.nuisance,
            b: (0..self.p())
                .map(|i| [self.b[(i, 0)], self.b[(i, 1)]])
                .collect(),
        }
    }

    fn locations(&self) -> Result<Vec<Point>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(STREAM_LOCATIONS);
        let mut pts = sample_with_rng(&self.plan, self.m, &mut rng)?;
        for p in pts.iter_mut() {
            // a device exactly at the receiver has no defined signal
            while p.dist(&self.r0) == 0.0 {
                *p = sample_with_rng(&self.plan, 1, &mut rng)?[0];
            }
        }
        Ok(pts)
    }

    fn gains(&self) -> Vec<f64> {
        match self.nuisance {
            None => vec![1.0; self.m],
            Some(g) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(STREAM_GAINS);
                let (lo, hi) = (g.min.ln(), g.max.ln());
                (0..self.m)
                    .map(|_| {
                        if hi > lo {
                            rng.gen_range(lo..hi).exp()
                        } else {
                            g.min
                        }
                    })
                    .collect()
            }
        }
    }

    fn signals(&self, locations: &[Point], dist: &[f64], gains: &[f64]) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(locations.len(), p, |i, k| {
            let x = locations[i];
            gains[i] * (self.b[(k, 0)] * x.x + self.b[(k, 1)] * x.y) / (dist[i] * dist[i])
        })
    }
}

/// Generated devices: true positions, signals and the gains applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub locations: Vec<Point>,
    pub signals: FeatureMatrix,
    pub gains: Vec<f64>,
}

/// `S_i = theta_i * B x_i / |x_i - r0|^2` at uniformly sampled `x_i`.
pub fn generate_radial(scenario: &SynthScenario) -> Result<SynthData> {
    if scenario.plan.contains(&scenario.r0) {
        return Err(Error::InvalidParameter(
            "the receiver must lie outside the region for the Euclidean model".into(),
        ));
    }
    let locations = scenario.locations()?;
    let dist: Vec<f64> = locations.iter().map(|x| x.dist(&scenario.r0)).collect();
    let gains = scenario.gains();
    let signals = FeatureMatrix::real(scenario.signals(&locations, &dist, &gains))?;
    Ok(SynthData {
        locations,
        signals,
        gains,
    })
}

/// As [`generate_radial`] with the obstacle-aware distance to the receiver.
pub fn generate_geodesic(scenario: &SynthScenario, resolution: f64) -> Result<SynthData> {
    let field = GeodesicField::new(&scenario.plan, scenario.r0, resolution)?;
    let locations = scenario.locations()?;
    let dist: Vec<f64> = locations.iter().map(|x| field.distance_to(x)).collect();
    if let Some(i) = dist.iter().position(|d| !d.is_finite()) {
        return Err(Error::Unreachable(format!(
            "device {i} cannot reach the receiver"
        )));
    }
    let gains = scenario.gains();
    let signals = FeatureMatrix::real(scenario.signals(&locations, &dist, &gains))?;
    Ok(SynthData {
        locations,
        signals,
        gains,
    })
}

/// Devices built from a raw corpus: each center's K nearest raw signals.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSets {
    pub centers: Vec<Point>,
    /// Raw index of each center.
    pub center_indices: Vec<usize>,
    /// Raw members of each set, nearest first (indices into the raw input).
    pub members: Vec<Vec<usize>>,
    pub sets: Vec<SignalSet>,
}

pub const DEFAULT_SET_SIZE: usize = 80;
pub const DEFAULT_SET_RADIUS: f64 = 1.0;

/// Lexicographic order on (x, y, features); makes the output independent of
/// the raw corpus order.
fn canonical_order(locations: &[Point], signals: &DMatrix<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..locations.len()).collect();
    idx.sort_by(|&a, &b| {
        locations[a]
            .x
            .total_cmp(&locations[b].x)
            .then(locations[a].y.total_cmp(&locations[b].y))
            .then_with(|| {
                (0..signals.ncols())
                    .map(|c| signals[(a, c)].total_cmp(&signals[(b, c)]))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    idx
}

/// Subsamples `m` centers from the raw locations and groups the `k` raw
/// signals nearest each center (all within `radius`) into a K x p set.
pub fn build_signal_sets(
    raw_locations: &[Point],
    raw_signals: &DMatrix<f64>,
    m: usize,
    k: usize,
    radius: f64,
    seed: u64,
) -> Result<SignalSets> {
    let r = raw_locations.len();
    if raw_signals.nrows() != r {
        return Err(Error::DimensionMismatch(format!(
            "{r} locations for {} signals",
            raw_signals.nrows()
        )));
    }
    if m == 0 || m > r || k == 0 || k > r {
        return Err(Error::InvalidParameter(format!(
            "cannot build {m} sets of {k} from {r} raw signals"
        )));
    }
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let order = canonical_order(raw_locations, raw_signals);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, r, m).into_vec();
    picks.sort_unstable();
    let mut centers = Vec::with_capacity(m);
    let mut center_indices = Vec::with_capacity(m);
    let mut members = Vec::with_capacity(m);
    let mut sets = Vec::with_capacity(m);
    for (ci, &pick) in picks.iter().enumerate() {
        let center = raw_locations[order[pick]];
        let mut near: Vec<(f64, usize)> = order
            .iter()
            .enumerate()
            .map(|(rank, &raw)| (raw_locations[raw].dist(&center), rank))
            .filter(|(d, _)| *d <= radius)
            .collect();
        if near.len() < k {
            return Err(Error::InsufficientDensity {
                center: ci,
                found: near.len(),
                needed: k,
                radius,
            });
        }
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let idx: Vec<usize> = near[..k].iter().map(|&(_, rank)| order[rank]).collect();
        sets.push(DMatrix::from_fn(k, raw_signals.ncols(), |row, c| {
            Complex::new(raw_signals[(idx[row], c)], 0.0)
        }));
        centers.push(center);
        center_indices.push(order[pick]);
        members.push(idx);
    }
    Ok(SignalSets {
        centers,
        center_indices,
        members,
        sets,
    })
}

/// Coordinate-wise median of the K rows; even K averages the two middle
/// values.
pub fn median_signal(set: &DMatrix<f64>) -> Result<Vec<f64>> {
    if set.nrows() == 0 {
        return Err(Error::InvalidParameter(
            "median of an empty signal set".into(),
        ));
    }
    Ok((0..set.ncols())
        .map(|c| {
            let mut col: Vec<f64> = set.column(c).iter().copied().collect();
            col.sort_by(f64::total_cmp);
            let n = col.len();
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect())
}
