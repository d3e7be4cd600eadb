//! Linear calibration between signal and area embeddings, 1-NN
//! localization, the matching loss and parameter sweeps.

mod anchors;
mod localize;
mod sweep;

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floorplan::Point;
use crate::spectral::{Embedding, Laplacian};

pub use anchors::{kmeans, kmeans_anchors, random_anchors};
pub use localize::{
    extend_out_of_sample, extend_with_index, localize_1nn, matching_loss, nearest_rows,
};
pub use sweep::{sweep_lambda, SweepInputs, SweepRow, SweepTable};

/// Default regularization weight.
pub const DEFAULT_LAMBDA: f64 = 0.01;

/// Smallest accepted eigenvalue ratio of the regularized Gram matrix.
const ILL_POSED_RATIO: f64 = 1e-12;

/// Devices with known positions, as indices into the signals and into the
/// area sample (where the anchor's true position was inserted).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedAnchors {
    signal: Vec<usize>,
    area: Vec<usize>,
}

impl SharedAnchors {
    pub fn new(signal: Vec<usize>, area: Vec<usize>) -> Result<Self> {
        if signal.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one anchor is required".into(),
            ));
        }
        if signal.len() != area.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} signal anchors but {} area anchors",
                signal.len(),
                area.len()
            )));
        }
        for (name, list) in [("signal", &signal), ("area", &area)] {
            let mut sorted = list.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate {name} anchor index"
                )));
            }
        }
        Ok(Self { signal, area })
    }

    pub fn signal(&self) -> &[usize] {
        &self.signal
    }

    pub fn area(&self) -> &[usize] {
        &self.area
    }

    pub fn len(&self) -> usize {
        self.signal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal.is_empty()
    }

    /// The anchors at positions `keep` of this list.
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        Self::new(
            keep.iter().map(|&k| self.signal[k]).collect(),
            keep.iter().map(|&k| self.area[k]).collect(),
        )
    }

    fn check_range(&self, m: usize, t: usize) -> Result<()> {
        if let Some(&i) = self.signal.iter().find(|&&i| i >= m) {
            return Err(Error::InvalidParameter(format!(
                "signal anchor {i} out of range for {m} signals"
            )));
        }
        if let Some(&i) = self.area.iter().find(|&&i| i >= t) {
            return Err(Error::InvalidParameter(format!(
                "area anchor {i} out of range for {t} area points"
            )));
        }
        Ok(())
    }
}

/// The fitted l x d map together with what is needed to localize.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    c: DMatrix<f64>,
    lambda: f64,
    area_embedding: Embedding,
    area_points: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(rename = "C")]
    c: Vec<f64>,
    lambda: f64,
    d: usize,
    l: usize,
    sign_convention: String,
    area_embedding: String,
    area_points: String,
}

impl CalibrationModel {
    pub fn new(
        c: DMatrix<f64>,
        lambda: f64,
        area_embedding: Embedding,
        area_points: Vec<Point>,
    ) -> Result<Self> {
        if c.nrows() != area_embedding.dim() {
            return Err(Error::DimensionMismatch(format!(
                "C has {} rows, area embedding has {} columns",
                c.nrows(),
                area_embedding.dim()
            )));
        }
        if area_points.len() != area_embedding.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} area points for {} embedding rows",
                area_points.len(),
                area_embedding.nrows()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(
                "calibration matrix is not finite".into(),
            ));
        }
        Ok(Self {
            c,
            lambda,
            area_embedding,
            area_points,
        })
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn d(&self) -> usize {
        self.c.ncols()
    }

    pub fn l(&self) -> usize {
        self.c.nrows()
    }

    pub fn area_embedding(&self) -> &Embedding {
        &self.area_embedding
    }

    pub fn area_points(&self) -> &[Point] {
        &self.area_points
    }

    /// Writes `model.json`, `area_embedding.csv` (with sidecar) and
    /// `area_points.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.area_embedding.save(dir.join("area_embedding.csv"))?;
        let mut w = csv::Writer::from_path(dir.join("area_points.csv"))?;
        w.write_record(["id", "x", "y"])?;
        for (i, p) in self.area_points.iter().enumerate() {
            w.write_record([i.to_string(), p.x.to_string(), p.y.to_string()])?;
        }
        w.flush()?;
        let file = ModelFile {
            c: (0..self.l())
                .flat_map(|r| (0..self.d()).map(move |c| (r, c)))
                .map(|(r, c)| self.c[(r, c)])
                .collect(),
            lambda: self.lambda,
            d: self.d(),
            l: self.l(),
            sign_convention: "max-abs-positive".into(),
            area_embedding: "area_embedding.csv".into(),
            area_points: "area_points.csv".into(),
        };
        std::fs::write(dir.join("model.json"), serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    /// Reads a model written by [`CalibrationModel::save`]; referenced files
    /// are resolved relative to the JSON file.
    pub fn load(model_json: impl AsRef<Path>) -> Result<Self> {
        let path = model_json.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.c.len() != file.l * file.d {
            return Err(Error::InvalidData(format!(
                "C has {} entries, expected {}x{}",
                file.c.len(),
                file.l,
                file.d
            )));
        }
        let c = DMatrix::from_row_slice(file.l, file.d, &file.c);
        let emb = Embedding::load(base.join(&file.area_embedding))?;
        let mut r = csv::Reader::from_path(base.join(&file.area_points))?;
        let mut pts = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let get = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: "expected id,x,y".into(),
                    })
            };
            pts.push(Point::new(get(1)?, get(2)?));
        }
        Self::new(c, file.lambda, emb, pts)
    }
}

/// The d x d regularizer `Phi^T L Phi` computed explicitly.
pub fn regularizer_explicit(
    signal_emb: &Embedding,
    signal_lap: &Laplacian,
) -> Result<DMatrix<f64>> {
    if signal_lap.len() != signal_emb.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "Laplacian of size {} for an embedding with {} rows",
            signal_lap.len(),
            signal_emb.nrows()
        )));
    }
    let phi = signal_emb.vectors();
    Ok(phi.transpose() * signal_lap.matrix() * phi)
}

fn anchor_blocks(
    signal_emb: &Embedding,
    area_emb: &Embedding,
    anchors: &SharedAnchors,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    anchors.check_range(signal_emb.nrows(), area_emb.nrows())?;
    Ok((
        signal_emb.select_rows(anchors.signal()),
        area_emb.select_rows(anchors.area()),
    ))
}

/// `(1/N) sum |a_i - C s_i|^2 + (lambda/d) Tr(C Q C^T)` with `Q` the diagonal
/// of signal eigenvalues.
pub fn objective(
    c: &DMatrix<f64>,
    signal_emb: &Embedding,
    area_emb: &Embedding,
    anchors: &SharedAnchors,
    lambda: f64,
) -> Result<f64> {
    let (s, a) = anchor_blocks(signal_emb, area_emb, anchors)?;
    check_c_shape(c, signal_emb.dim(), area_emb.dim())?;
    let n = anchors.len() as f64;
    let d = signal_emb.dim() as f64;
    let fit = (a - s * c.transpose()).norm_squared() / n;
    let q = signal_emb.eigenvalues();
    let reg: f64 = (0..c.nrows())
        .map(|r| {
            (0..c.ncols())
                .map(|k| q[k] * c[(r, k)] * c[(r, k)])
                .sum::<f64>()
        })
        .sum();
    Ok(fit + lambda / d * reg)
}

/// Gradient of [`objective`] with respect to C.
pub fn objective_gradient(
    c: &DMatrix<f64>,
    signal_emb: &Embedding,
    area_emb: &Embedding,
    anchors: &SharedAnchors,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    let (s, a) = anchor_blocks(signal_emb, area_emb, anchors)?;
    check_c_shape(c, signal_emb.dim(), area_emb.dim())?;
    let n = anchors.len() as f64;
    let d = signal_emb.dim() as f64;
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
        signal_emb.eigenvalues(),
    ));
    Ok((c * s.transpose() * &s - a.transpose() * &s) * (2.0 / n) + c * q * (2.0 * lambda / d))
}

fn check_c_shape(c: &DMatrix<f64>, d: usize, l: usize) -> Result<()> {
    if c.nrows() != l || c.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "C is {}x{}, expected {l}x{d}",
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(())
}

/// Closed-form minimizer of [`objective`]:
/// `C = (A^T S)(S^T S + (lambda N / d) Q)^{-1}` over the anchor rows.
pub fn solve_calibration(
    signal_emb: &Embedding,
    area_emb: &Embedding,
    area_points: &[Point],
    anchors: &SharedAnchors,
    lambda: f64,
) -> Result<CalibrationModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let (s, a) = anchor_blocks(signal_emb, area_emb, anchors)?;
    let n = anchors.len() as f64;
    let d = signal_emb.dim();
    let mut gram = s.transpose() * &s;
    for (k, ev) in signal_emb.eigenvalues().iter().enumerate() {
        gram[(k, k)] += lambda * n / d as f64 * ev;
    }
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if ratio.is_nan() || ratio <= ILL_POSED_RATIO {
        return Err(Error::IllPosed { ratio });
    }
    let rhs = s.transpose() * a;
    let ct = gram
        .cholesky()
        .ok_or(Error::IllPosed { ratio })?
        .solve(&rhs);
    CalibrationModel::new(
        ct.transpose(),
        lambda,
        area_emb.clone(),
        area_points.to_vec(),
    )
}

/// Calibrated representation: row j is `C phi_S(j)`.
pub fn calibrate(model: &CalibrationModel, signal_emb: &Embedding) -> Result<DMatrix<f64>> {
    if signal_emb.dim() != model.d() {
        return Err(Error::DimensionMismatch(format!(
            "model expects d = {}, embedding has {} columns",
            model.d(),
            signal_emb.dim()
        )));
    }
    Ok(signal_emb.vectors() * model.c().transpose())
}
