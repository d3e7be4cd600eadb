//! Localization error summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floorplan::Point;

/// Summary of localization errors in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub p25: f64,
    pub p75: f64,
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile(&v, 0.5)
}

pub fn error_stats(errors: &[f64]) -> Result<ErrorStats> {
    if errors.is_empty() {
        return Err(Error::InvalidParameter(
            "no errors to summarize (every device is an anchor)".into(),
        ));
    }
    let mut v = errors.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(ErrorStats {
        count: v.len(),
        median: percentile(&v, 0.5),
        mean,
        std: var.sqrt(),
        p25: percentile(&v, 0.25),
        p75: percentile(&v, 0.75),
    })
}

/// Per-device Euclidean errors.
pub fn localization_errors(estimates: &[Point], truth: &[Point]) -> Vec<f64> {
    estimates
        .iter()
        .zip(truth)
        .map(|(a, b)| a.dist(b))
        .collect()
}

/// Errors of the devices not listed in `anchors`.
pub fn non_anchor_errors(estimates: &[Point], truth: &[Point], anchors: &[usize]) -> Vec<f64> {
    let mut is_anchor = vec![false; estimates.len()];
    for &a in anchors {
        if a < is_anchor.len() {
            is_anchor[a] = true;
        }
    }
    localization_errors(estimates, truth)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !is_anchor[*i])
        .map(|(_, e)| e)
        .collect()
}

/// Pearson correlation; NaN when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}
