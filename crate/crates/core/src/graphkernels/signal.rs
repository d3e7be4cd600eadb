//! Kernel selection, graph construction and similarity queries against a
//! fixed set of known signals.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use super::gaussian::{
    knn_bandwidth_from_sq_distances, knn_distances, normalized_gaussian_from_sq_distances,
    self_tuning_gaussian_from_sq_distances, DEFAULT_KNN,
};
use super::projection::{
    binary_mutual_knn, second_moment, top_eigenvectors, trace_projection_similarity, DEFAULT_RANK,
};
use super::{FeatureMatrix, SignalSet, WeightedGraph};
use crate::error::{Error, Result};

fn default_k() -> usize {
    DEFAULT_KNN
}

fn default_rank() -> usize {
    DEFAULT_RANK
}

/// Which kernel turns features into a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Global bandwidth; `sigma` defaults to the max k-th-neighbour distance.
    NormalizedGaussian {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
    SelfTuning {
        #[serde(default = "default_k")]
        k: usize,
    },
    /// Projection-trace similarity between signal sets, symmetrized into a
    /// binary kNN graph.
    TraceProjection {
        #[serde(default = "default_rank")]
        rank: usize,
        #[serde(default = "default_k")]
        k: usize,
    },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::SelfTuning { k: DEFAULT_KNN }
    }
}

/// Signals of M devices: one feature vector each, or one K x p set each.
#[derive(Debug, Clone, PartialEq)]
pub enum Signals {
    Vectors(FeatureMatrix),
    Sets(Vec<SignalSet>),
}

impl Signals {
    pub fn len(&self) -> usize {
        match self {
            Signals::Vectors(f) => f.nrows(),
            Signals::Sets(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Signals {
        match self {
            Signals::Vectors(f) => Signals::Vectors(f.select_rows(idx)),
            Signals::Sets(s) => Signals::Sets(idx.iter().map(|&i| s[i].clone()).collect()),
        }
    }

    fn vectors(&self, kernel: &str) -> Result<&FeatureMatrix> {
        match self {
            Signals::Vectors(f) => Ok(f),
            Signals::Sets(_) => Err(Error::InvalidParameter(format!(
                "{kernel} kernel needs one feature vector per device, got signal sets"
            ))),
        }
    }

    fn sets(&self) -> Result<&[SignalSet]> {
        match self {
            Signals::Sets(s) => Ok(s),
            Signals::Vectors(_) => Err(Error::InvalidParameter(
                "trace_projection kernel needs signal sets, got feature vectors".into(),
            )),
        }
    }
}

impl KernelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::NormalizedGaussian { .. } => "normalized_gaussian",
            KernelSpec::SelfTuning { .. } => "self_tuning",
            KernelSpec::TraceProjection { .. } => "trace_projection",
        }
    }

    /// Graph over items given only their pairwise squared distances (used
    /// for area graphs, where distances may be geodesic).
    pub fn graph_from_sq_distances(&self, sq_dist: &DMatrix<f64>) -> Result<WeightedGraph> {
        match *self {
            KernelSpec::NormalizedGaussian { k, sigma } => {
                let sigma = match sigma {
                    Some(s) => s,
                    None => knn_bandwidth_from_sq_distances(sq_dist, k)?,
                };
                normalized_gaussian_from_sq_distances(sq_dist, sigma)
            }
            KernelSpec::SelfTuning { k } => self_tuning_gaussian_from_sq_distances(sq_dist, k),
            KernelSpec::TraceProjection { .. } => Err(Error::InvalidParameter(
                "trace_projection kernel cannot be built from distances".into(),
            )),
        }
    }

    /// Kernel values between all pairs of devices: the Gaussian weights, or
    /// the (possibly asymmetric) projection-trace similarity.
    pub fn similarity_matrix(&self, signals: &Signals) -> Result<DMatrix<f64>> {
        match *self {
            KernelSpec::TraceProjection { rank, .. } => {
                trace_projection_similarity(signals.sets()?, rank)
            }
            _ => {
                let f = signals.vectors(self.name())?;
                Ok(self
                    .graph_from_sq_distances(&f.pairwise_sq_distances())?
                    .weights()
                    .clone())
            }
        }
    }

    pub fn build_graph(&self, signals: &Signals) -> Result<WeightedGraph> {
        match *self {
            KernelSpec::TraceProjection { k, .. } => {
                binary_mutual_knn(&self.similarity_matrix(signals)?, k)
            }
            _ => {
                let f = signals.vectors(self.name())?;
                self.graph_from_sq_distances(&f.pairwise_sq_distances())
            }
        }
    }
}

enum IndexState {
    Gaussian {
        known: FeatureMatrix,
        sigma: f64,
        q: Vec<f64>,
    },
    SelfTuning {
        known: FeatureMatrix,
        k: usize,
        sigma: Vec<f64>,
        q: Vec<f64>,
    },
    Projection {
        /// Rows: flattened (re, im) projections of the known sets.
        projections: DMatrix<f64>,
        p: usize,
    },
}

/// Kernel similarities from new signals to a fixed known set, evaluated
/// with the bandwidths and normalizers of the known set.
pub struct SimilarityIndex {
    spec: KernelSpec,
    state: IndexState,
    len: usize,
}

impl SimilarityIndex {
    pub fn new(spec: &KernelSpec, known: &Signals) -> Result<Self> {
        let len = known.len();
        if len == 0 {
            return Err(Error::InvalidParameter("known signal set is empty".into()));
        }
        let state = match *spec {
            KernelSpec::NormalizedGaussian { k, sigma } => {
                let f = known.vectors(spec.name())?.clone();
                let d2 = f.pairwise_sq_distances();
                let sigma = match sigma {
                    Some(s) => s,
                    None => knn_bandwidth_from_sq_distances(&d2, k)?,
                };
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::DegenerateBandwidth(format!("sigma = {sigma}")));
                }
                let q = (0..len)
                    .map(|i| d2.row(i).iter().map(|d| (-d / (sigma * sigma)).exp()).sum())
                    .collect();
                IndexState::Gaussian { known: f, sigma, q }
            }
            KernelSpec::SelfTuning { k } => {
                let f = known.vectors(spec.name())?.clone();
                let d2 = f.pairwise_sq_distances();
                let sigma = knn_distances(&d2, k)?;
                if let Some(i) = sigma.iter().position(|&s| s.is_nan() || s <= 0.0) {
                    return Err(Error::DegenerateBandwidth(format!(
                        "known item {i} has sigma_i = 0"
                    )));
                }
                let q = (0..len)
                    .map(|i| {
                        (0..len)
                            .map(|t| (-d2[(i, t)] / (sigma[i] * sigma[t])).exp())
                            .sum()
                    })
                    .collect();
                IndexState::SelfTuning {
                    known: f,
                    k,
                    sigma,
                    q,
                }
            }
            KernelSpec::TraceProjection { rank, .. } => {
                let sets = known.sets()?;
                let p = sets[0].ncols();
                if rank == 0 || rank > p {
                    return Err(Error::InvalidParameter(format!(
                        "rank {rank} out of range for p = {p}"
                    )));
                }
                let mut rows = Vec::with_capacity(len);
                for (i, s) in sets.iter().enumerate() {
                    if s.ncols() != p {
                        return Err(Error::DimensionMismatch(format!(
                            "signal set {i} has {} columns, expected {p}",
                            s.ncols()
                        )));
                    }
                    let r = second_moment(s).map_err(|_| Error::ZeroNormSignal(i))?;
                    let (v, _) = top_eigenvectors(&r, rank);
                    rows.push(flatten(&(&v * v.adjoint())));
                }
                let projections = DMatrix::from_fn(len, 2 * p * p, |i, c| rows[i][c]);
                IndexState::Projection { projections, p }
            }
        };
        Ok(Self {
            spec: spec.clone(),
            state,
            len,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Kernel values, one row per query and one column per known signal.
    /// The query counts as an extra item in its own normalizer; known
    /// normalizers are those of the known set alone.
    pub fn similarities(&self, queries: &Signals) -> Result<DMatrix<f64>> {
        match &self.state {
            IndexState::Gaussian { known, sigma, q } => {
                let d2 = known.cross_sq_distances(queries.vectors(self.spec.name())?)?;
                let e = d2.map(|d| (-d / (sigma * sigma)).exp());
                Ok(normalize_rows(e, q))
            }
            IndexState::SelfTuning { known, k, sigma, q } => {
                let d2 = known.cross_sq_distances(queries.vectors(self.spec.name())?)?;
                let kk = (*k).min(self.len);
                let mut e = DMatrix::zeros(d2.nrows(), d2.ncols());
                for r in 0..d2.nrows() {
                    let mut row: Vec<f64> = d2.row(r).iter().copied().collect();
                    let (_, kth, _) = row.select_nth_unstable_by(kk - 1, f64::total_cmp);
                    let sq = kth.sqrt();
                    for j in 0..d2.ncols() {
                        let d = d2[(r, j)];
                        e[(r, j)] = if d == 0.0 {
                            1.0
                        } else {
                            (-d / (sq * sigma[j])).exp()
                        };
                    }
                }
                Ok(normalize_rows(e, q))
            }
            IndexState::Projection { projections, p } => {
                let sets = queries.sets()?;
                let mut rows = Vec::with_capacity(sets.len());
                for (i, s) in sets.iter().enumerate() {
                    if s.ncols() != *p {
                        return Err(Error::DimensionMismatch(format!(
                            "query set {i} has {} columns, expected {p}",
                            s.ncols()
                        )));
                    }
                    rows.push(flatten(
                        &second_moment(s).map_err(|_| Error::ZeroNormSignal(i))?,
                    ));
                }
                let a = DMatrix::from_fn(sets.len(), 2 * p * p, |i, c| rows[i][c]);
                Ok(a * projections.transpose())
            }
        }
    }

    /// Index of the most similar known signal for each query (ties by
    /// smaller index).
    pub fn most_similar(&self, queries: &Signals) -> Result<Vec<usize>> {
        let s = self.similarities(queries)?;
        Ok((0..s.nrows())
            .map(|r| argmax(s.row(r).iter().copied()))
            .collect())
    }
}

/// First index of the maximum.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Divides each query row by (1 + its sum) and each column by the known
/// item's normalizer.
fn normalize_rows(e: DMatrix<f64>, q_known: &[f64]) -> DMatrix<f64> {
    let mut out = e.clone();
    for r in 0..e.nrows() {
        let q_query = 1.0 + e.row(r).sum();
        for j in 0..e.ncols() {
            out[(r, j)] = e[(r, j)] / (q_query * q_known[j]);
        }
    }
    out
}

fn flatten(m: &DMatrix<Complex<f64>>) -> Vec<f64> {
    m.iter()
        .map(|c| c.re)
        .chain(m.iter().map(|c| c.im))
        .collect()
}
