//! Signal corpora on disk and ingestion of RSSI fingerprinting tables.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::floorplan::Point;
use crate::graphkernels::{sidecar_path, FeatureMatrix};
use crate::synth::median_signal;

pub const SCHEMA_VERSION: u32 = 1;

/// Provenance stored next to every corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// Features are stored as interleaved (re, im) pairs.
    pub complex: bool,
    pub feature_dim: usize,
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub device_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub building: Option<i64>,
    /// Real features, or (re, im) pairs for complex corpora.
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Csv,
    Json,
}

impl Schema {
    /// Picks the schema from the file extension; anything but `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Schema::Json,
            _ => Schema::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalCorpus {
    records: Vec<SignalRecord>,
    manifest: Manifest,
}

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    manifest: Manifest,
    records: Vec<SignalRecord>,
}

impl SignalCorpus {
    pub fn new(
        records: Vec<SignalRecord>,
        complex: bool,
        params: Map<String, Value>,
    ) -> Result<Self> {
        let width = records.first().map_or(0, |r| r.features.len());
        let feature_dim = if complex { width / 2 } else { width };
        let corpus = Self {
            records,
            manifest: Manifest {
                schema_version: SCHEMA_VERSION,
                complex,
                feature_dim,
                params,
            },
        };
        corpus.validate()?;
        Ok(corpus)
    }

    /// Corpus from a feature matrix; ids are `0..M` and positions optional.
    pub fn from_features(
        features: &FeatureMatrix,
        positions: Option<&[Point]>,
        params: Map<String, Value>,
    ) -> Result<Self> {
        let m = features.nrows();
        if let Some(p) = positions {
            if p.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "{} positions for {m} signals",
                    p.len()
                )));
            }
        }
        let row = |i: usize| -> Vec<f64> {
            match features {
                FeatureMatrix::Real(f) => f.row(i).iter().copied().collect(),
                FeatureMatrix::Complex(f) => f.row(i).iter().flat_map(|c| [c.re, c.im]).collect(),
            }
        };
        let records = (0..m)
            .map(|i| SignalRecord {
                device_id: i.to_string(),
                position: positions.map(|p| p[i]),
                floor: None,
                building: None,
                features: row(i),
            })
            .collect();
        Self::new(records, features.is_complex(), params)
    }

    fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported schema version {}",
                m.schema_version
            )));
        }
        let width = if m.complex {
            2 * m.feature_dim
        } else {
            m.feature_dim
        };
        if width == 0 && !self.records.is_empty() {
            return Err(Error::InvalidData("records have no features".into()));
        }
        let mut seen = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            if r.features.len() != width {
                return Err(Error::InvalidData(format!(
                    "record {i} ({}) has {} feature values, expected {width}",
                    r.device_id,
                    r.features.len()
                )));
            }
            if r.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "record {i} ({}) has a non-finite feature",
                    r.device_id
                )));
            }
            if r.position.is_some_and(|p| !p.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "record {i} ({}) has a non-finite position",
                    r.device_id
                )));
            }
            if !seen.insert(r.device_id.as_str()) {
                return Err(Error::InvalidData(format!(
                    "duplicate device id '{}'",
                    r.device_id
                )));
            }
        }
        Ok(())
    }

    pub fn records(&self) -> &[SignalRecord] {
        &self.records
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn params_mut(&mut self) -> &mut Map<String, Value> {
        &mut self.manifest.params
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_complex(&self) -> bool {
        self.manifest.complex
    }

    pub fn feature_dim(&self) -> usize {
        self.manifest.feature_dim
    }

    pub fn features(&self) -> Result<FeatureMatrix> {
        let (m, p) = (self.len(), self.feature_dim());
        let f = &self.records;
        if self.is_complex() {
            FeatureMatrix::complex(DMatrix::from_fn(m, p, |i, j| {
                Complex::new(f[i].features[2 * j], f[i].features[2 * j + 1])
            }))
        } else {
            FeatureMatrix::real(DMatrix::from_fn(m, p, |i, j| f[i].features[j]))
        }
    }

    /// All positions, or `None` if any record lacks one.
    pub fn positions(&self) -> Option<Vec<Point>> {
        self.records.iter().map(|r| r.position).collect()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.device_id.as_str()).collect()
    }

    /// Index of each id, in the order given.
    pub fn index_of(&self, ids: &[String]) -> Result<Vec<usize>> {
        let lookup: BTreeMap<&str, usize> = self
            .ids()
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, i))
            .collect();
        ids.iter()
            .map(|id| {
                lookup
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidData(format!("unknown device id '{id}'")))
            })
            .collect()
    }

    fn has_tags(&self) -> bool {
        self.records
            .iter()
            .any(|r| r.floor.is_some() || r.building.is_some())
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["device_id", "x", "y"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        if self.has_tags() {
            h.push("floor".into());
            h.push("building".into());
        }
        for j in 0..self.feature_dim() {
            if self.is_complex() {
                h.push(format!("f{j}_re"));
                h.push(format!("f{j}_im"));
            } else {
                h.push(format!("f{j}"));
            }
        }
        h
    }

    /// Writes the corpus; CSV files get the manifest in a `<path>.json`
    /// sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        match Schema::from_path(path) {
            Schema::Json => {
                let file = CorpusFile {
                    manifest: self.manifest.clone(),
                    records: self.records.clone(),
                };
                fs::write(path, serde_json::to_string_pretty(&file)?)?;
            }
            Schema::Csv => {
                let tags = self.has_tags();
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(self.header())?;
                let opt = |v: Option<String>| v.unwrap_or_default();
                for r in &self.records {
                    let mut row = vec![
                        r.device_id.clone(),
                        opt(r.position.map(|p| p.x.to_string())),
                        opt(r.position.map(|p| p.y.to_string())),
                    ];
                    if tags {
                        row.push(opt(r.floor.map(|v| v.to_string())));
                        row.push(opt(r.building.map(|v| v.to_string())));
                    }
                    row.extend(r.features.iter().map(|v| v.to_string()));
                    w.write_record(&row)?;
                }
                w.flush()?;
                fs::write(
                    sidecar_path(path),
                    serde_json::to_string_pretty(&self.manifest)?,
                )?;
            }
        }
        Ok(())
    }
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_opt<T: std::str::FromStr>(cell: &str, line: u64, column: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<T>().map(Some).map_err(|e| {
        parse_err(
            line,
            format!("column {column}: '{cell}' is not numeric ({e})"),
        )
    })
}

/// Feature layout implied by the header after the fixed columns.
fn feature_layout(names: &[String]) -> Result<bool> {
    let complex = names.first().is_some_and(|n| n.ends_with("_re"));
    let expected: Vec<String> = if complex {
        (0..names.len() / 2)
            .flat_map(|j| [format!("f{j}_re"), format!("f{j}_im")])
            .collect()
    } else {
        (0..names.len()).map(|j| format!("f{j}")).collect()
    };
    if names.is_empty() || names != expected.as_slice() {
        return Err(parse_err(
            1,
            "feature columns must be f0, f1, ... or f0_re, f0_im, f1_re, ...",
        ));
    }
    Ok(complex)
}

fn load_csv(path: &Path) -> Result<SignalCorpus> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    for (i, name) in ["device_id", "x", "y"].iter().enumerate() {
        if col(name) != Some(i) {
            return Err(Error::MissingColumn(format!(
                "expected '{name}' as column {}",
                i + 1
            )));
        }
    }
    let tags = col("floor") == Some(3) && col("building") == Some(4);
    let first_feature = if tags { 5 } else { 3 };
    let complex = feature_layout(&header[first_feature..])?;
    let mut records = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(n as u64 + 2, |p| p.line());
        if rec.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let x: Option<f64> = parse_opt(&rec[1], line, "x")?;
        let y: Option<f64> = parse_opt(&rec[2], line, "y")?;
        let position = match (x, y) {
            (Some(x), Some(y)) => Some(Point::new(x, y)),
            (None, None) => None,
            _ => {
                return Err(parse_err(
                    line,
                    "x and y must both be given or both be blank",
                ))
            }
        };
        let (floor, building) = if tags {
            (
                parse_opt(&rec[3], line, "floor")?,
                parse_opt(&rec[4], line, "building")?,
            )
        } else {
            (None, None)
        };
        let features = (first_feature..rec.len())
            .map(|c| {
                parse_opt::<f64>(&rec[c], line, &header[c])?
                    .ok_or_else(|| parse_err(line, format!("column {} is blank", header[c])))
            })
            .collect::<Result<Vec<f64>>>()?;
        records.push((
            line,
            SignalRecord {
                device_id: rec[0].trim().to_string(),
                position,
                floor,
                building,
                features,
            },
        ));
    }
    let mut seen = BTreeMap::new();
    for (line, r) in &records {
        if let Some(first) = seen.insert(r.device_id.as_str(), *line) {
            return Err(parse_err(
                *line,
                format!(
                    "duplicate device id '{}' (first on line {first})",
                    r.device_id
                ),
            ));
        }
    }
    let records: Vec<SignalRecord> = records.into_iter().map(|(_, r)| r).collect();
    let sidecar = sidecar_path(path);
    let params = if sidecar.exists() {
        let m: Manifest = serde_json::from_str(&fs::read_to_string(&sidecar)?)?;
        if m.complex != complex {
            return Err(Error::InvalidData(
                "manifest and header disagree on complex features".into(),
            ));
        }
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported schema version {}",
                m.schema_version
            )));
        }
        m.params
    } else {
        Map::new()
    };
    SignalCorpus::new(records, complex, params)
}

fn load_json(path: &Path) -> Result<SignalCorpus> {
    let file: CorpusFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    let corpus = SignalCorpus {
        records: file.records,
        manifest: file.manifest,
    };
    corpus.validate()?;
    Ok(corpus)
}

pub fn load_corpus(path: impl AsRef<Path>, schema: Schema) -> Result<SignalCorpus> {
    let path = path.as_ref();
    match schema {
        Schema::Csv => load_csv(path),
        Schema::Json => load_json(path),
    }
}

/// Options for [`ingest_rssi_dataset`]. Column names follow the public
/// fingerprinting table: `WAP001..`, `LONGITUDE`, `LATITUDE`, `FLOOR`,
/// `BUILDINGID`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    pub floor: Option<i64>,
    pub building: Option<i64>,
    /// Value marking "not detected".
    pub missing_sentinel: f64,
    /// Replacement for the sentinel, in dBm.
    pub missing_value: f64,
    /// Drop receivers detected in fewer than this many kept rows.
    pub min_coverage: Option<usize>,
    pub receiver_prefix: String,
    pub x_column: String,
    pub y_column: String,
    pub floor_column: String,
    pub building_column: String,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            floor: None,
            building: None,
            missing_sentinel: 100.0,
            missing_value: -105.0,
            min_coverage: None,
            receiver_prefix: "WAP".into(),
            x_column: "LONGITUDE".into(),
            y_column: "LATITUDE".into(),
            floor_column: "FLOOR".into(),
            building_column: "BUILDINGID".into(),
        }
    }
}

struct RawRow {
    position: Point,
    floor: Option<i64>,
    building: Option<i64>,
    rssi: Vec<f64>,
}

/// Reads an RSSI table, filters by floor and building, maps the sentinel,
/// and aggregates rows sharing a location into their median signal.
/// Records are ordered by (x, y, floor, building) so the result does not
/// depend on row order.
pub fn ingest_rssi_dataset(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<SignalCorpus> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let need = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let xc = need(&opts.x_column)?;
    let yc = need(&opts.y_column)?;
    let fc = if opts.floor.is_some() {
        Some(need(&opts.floor_column)?)
    } else {
        find(&opts.floor_column)
    };
    let bc = if opts.building.is_some() {
        Some(need(&opts.building_column)?)
    } else {
        find(&opts.building_column)
    };
    let receivers: Vec<usize> = (0..header.len())
        .filter(|&c| {
            header[c]
                .strip_prefix(opts.receiver_prefix.as_str())
                .is_some_and(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
        })
        .collect();
    if receivers.is_empty() {
        return Err(Error::MissingColumn(format!(
            "no receiver columns with prefix '{}'",
            opts.receiver_prefix
        )));
    }

    let mut rows = Vec::new();
    let mut total = 0usize;
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(n as u64 + 2, |p| p.line());
        if rec.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        total += 1;
        let num = |c: usize| -> Result<f64> {
            parse_opt::<f64>(&rec[c], line, &header[c])?
                .ok_or_else(|| parse_err(line, format!("column {} is blank", header[c])))
        };
        let tag = |c: Option<usize>| -> Result<Option<i64>> {
            match c {
                Some(c) => Ok(Some(num(c)?.round() as i64)),
                None => Ok(None),
            }
        };
        let floor = tag(fc)?;
        let building = tag(bc)?;
        if opts.floor.is_some() && floor != opts.floor
            || opts.building.is_some() && building != opts.building
        {
            continue;
        }
        let rssi = receivers
            .iter()
            .map(|&c| num(c))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(RawRow {
            position: Point::new(num(xc)?, num(yc)?),
            floor,
            building,
            rssi,
        });
    }

    let keep: Vec<usize> = match opts.min_coverage {
        None => (0..receivers.len()).collect(),
        Some(min) => (0..receivers.len())
            .filter(|&j| {
                rows.iter()
                    .filter(|r| r.rssi[j] != opts.missing_sentinel)
                    .count()
                    >= min
            })
            .collect(),
    };
    if keep.is_empty() {
        return Err(Error::InvalidData(
            "no receiver meets the coverage threshold".into(),
        ));
    }

    type Key = (u64, u64, Option<i64>, Option<i64>);
    let key = |r: &RawRow| -> Key {
        (
            r.position.x.to_bits(),
            r.position.y.to_bits(),
            r.floor,
            r.building,
        )
    };
    let mut groups: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        groups.entry(key(row)).or_default().push(i);
    }
    let mut ordered: Vec<(&RawRow, Vec<usize>)> =
        groups.into_values().map(|g| (&rows[g[0]], g)).collect();
    ordered.sort_by(|(a, _), (b, _)| {
        a.position
            .x
            .total_cmp(&b.position.x)
            .then(a.position.y.total_cmp(&b.position.y))
            .then(a.floor.cmp(&b.floor))
            .then(a.building.cmp(&b.building))
    });

    let records = ordered
        .iter()
        .enumerate()
        .map(|(id, (first, members))| {
            let block = DMatrix::from_fn(members.len(), keep.len(), |i, j| {
                let v = rows[members[i]].rssi[keep[j]];
                if v == opts.missing_sentinel {
                    opts.missing_value
                } else {
                    v
                }
            });
            Ok(SignalRecord {
                device_id: id.to_string(),
                position: Some(first.position),
                floor: first.floor,
                building: first.building,
                features: median_signal(&block)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut params = Map::new();
    params.insert("source".into(), Value::from(path.display().to_string()));
    params.insert("ingest".into(), serde_json::to_value(opts)?);
    params.insert("raw_rows".into(), Value::from(total));
    params.insert("kept_rows".into(), Value::from(rows.len()));
    params.insert(
        "receivers".into(),
        Value::from(
            keep.iter()
                .map(|&j| header[receivers[j]].clone())
                .collect::<Vec<_>>(),
        ),
    );
    SignalCorpus::new(records, false, params)
}
