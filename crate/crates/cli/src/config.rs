//! JSON experiment configs. Every path is resolved against the directory
//! holding the config file.

use std::path::{Path, PathBuf};

use mmloc_core::calibration::DEFAULT_LAMBDA;
use mmloc_core::floorplan::Point;
use mmloc_core::synth::{GainRange, DEFAULT_SET_RADIUS, DEFAULT_SET_SIZE};
use mmloc_core::{AreaMetric, IngestOptions, KernelSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const DEFAULT_ERROR_VS_N: [usize; 5] = [5, 10, 20, 40, 80];

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_area_kernel() -> KernelSpec {
    KernelSpec::NormalizedGaussian { k: 10, sigma: None }
}

fn default_error_vs_n() -> Vec<usize> {
    DEFAULT_ERROR_VS_N.to_vec()
}

/// Seven log-spaced values from 1e-4 to 1.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..7)
        .map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 6.0))
        .collect()
}

fn default_folds() -> usize {
    5
}

fn default_set_size() -> usize {
    DEFAULT_SET_SIZE
}

fn default_set_radius() -> f64 {
    DEFAULT_SET_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnchorConfig {
    Random {
        count: usize,
    },
    Kmeans {
        count: usize,
    },
    /// Device ids as they appear in the corpus.
    Explicit {
        ids: Vec<String>,
    },
}

impl AnchorConfig {
    pub fn count(&self) -> usize {
        match self {
            AnchorConfig::Random { count } | AnchorConfig::Kmeans { count } => *count,
            AnchorConfig::Explicit { ids } => ids.len(),
        }
    }
}

/// Groups a raw corpus into signal sets; each set becomes one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetConfig {
    pub m: usize,
    #[serde(default = "default_set_size")]
    pub k: usize,
    #[serde(default = "default_set_radius")]
    pub radius: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_lambda_grid")]
    pub lambdas: Vec<f64>,
    /// Signal embedding dimensions to try; empty means the run's `d`.
    #[serde(default)]
    pub d_grid: Vec<usize>,
    /// Accepted only so it can be refused with a clear message.
    #[serde(default)]
    pub l_grid: Vec<usize>,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: default_lambda_grid(),
            d_grid: Vec::new(),
            l_grid: Vec::new(),
            folds: default_folds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub floor_plan: PathBuf,
    pub corpus: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub signal_kernel: KernelSpec,
    #[serde(default = "default_area_kernel")]
    pub area_kernel: KernelSpec,
    #[serde(default = "default_area_metric")]
    pub area_metric: AreaMetric,
    /// Area point count; defaults to the device count.
    #[serde(default)]
    pub t: Option<usize>,
    pub d: usize,
    pub l: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub anchors: AnchorConfig,
    /// Seeds anchor selection.
    #[serde(default)]
    pub seed: u64,
    /// Seeds area sampling; defaults to `seed`.
    #[serde(default)]
    pub area_seed: Option<u64>,
    #[serde(default)]
    pub signal_sets: Option<SetConfig>,
    #[serde(default = "default_error_vs_n")]
    pub error_vs_n: Vec<usize>,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_area_metric() -> AreaMetric {
    AreaMetric::Euclidean
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthModel {
    Radial,
    Geodesic,
}

fn default_r0() -> [f64; 2] {
    [-2.0, -2.0]
}

fn default_p() -> usize {
    20
}

fn default_m() -> usize {
    1000
}

fn default_synth_model() -> SynthModel {
    SynthModel::Radial
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Floor plan file; the unit square when absent.
    #[serde(default)]
    pub floor_plan: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default = "default_r0")]
    pub r0: [f64; 2],
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub nuisance: Option<GainRange>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_synth_model")]
    pub model: SynthModel,
    /// Grid resolution for the geodesic model; the plan default when absent.
    #[serde(default)]
    pub resolution: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub options: IngestOptions,
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_walls() -> Vec<[[f64; 2]; 2]> {
    vec![[[0.5, 0.0], [0.5, 0.7]]]
}

fn default_demo_kernel() -> KernelSpec {
    KernelSpec::SelfTuning { k: 10 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicDemoConfig {
    pub output_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_m")]
    pub t: usize,
    #[serde(default = "default_demo_n")]
    pub n: usize,
    #[serde(default = "default_demo_d")]
    pub d: usize,
    #[serde(default = "default_demo_l")]
    pub l: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_demo_resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub r0: [f64; 2],
    /// Walls inside the unit square.
    #[serde(default = "default_walls")]
    pub walls: Vec<[[f64; 2]; 2]>,
    #[serde(default = "default_demo_kernel")]
    pub kernel: KernelSpec,
}

fn default_demo_n() -> usize {
    20
}

fn default_demo_d() -> usize {
    10
}

fn default_demo_l() -> usize {
    4
}

fn default_demo_resolution() -> f64 {
    0.01
}

impl GeodesicDemoConfig {
    pub fn receiver(&self) -> Point {
        Point::new(self.r0[0], self.r0[1])
    }
}

/// Rewrites relative paths against a base directory.
pub trait ResolvePaths {
    fn resolve_paths(&mut self, base: &Path);
}

fn resolve(p: &mut PathBuf, base: &Path) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ResolvePaths for RunConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve(&mut self.floor_plan, base);
        resolve(&mut self.corpus, base);
        resolve(&mut self.output_dir, base);
    }
}

impl ResolvePaths for SynthConfig {
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = self.floor_plan.as_mut() {
            resolve(p, base);
        }
        resolve(&mut self.output_dir, base);
    }
}

impl ResolvePaths for IngestConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve(&mut self.input, base);
        resolve(&mut self.output_dir, base);
    }
}

impl ResolvePaths for GeodesicDemoConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve(&mut self.output_dir, base);
    }
}

/// Sets `a.b.c = value` in a JSON object, creating intermediate objects.
fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Config(format!("bad override key '{key}'")));
        }
        let obj = cur.as_object_mut().ok_or_else(|| {
            CliError::Config(format!("override '{key}': '{part}' is inside a non-object"))
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// `key=value` where the value is parsed as JSON, falling back to a string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{spec}' is not KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_dotted(root, key.trim(), value)
}

/// Parses a config from JSON text, applies overrides, and resolves paths
/// against `base`.
pub fn parse_config<T: DeserializeOwned + ResolvePaths>(
    text: &str,
    base: &Path,
    overrides: &[String],
) -> Result<T, CliError> {
    let mut value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let mut cfg: T = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.resolve_paths(base);
    Ok(cfg)
}

pub fn load_config<T: DeserializeOwned + ResolvePaths>(
    path: &Path,
    overrides: &[String],
) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base, overrides)
}
