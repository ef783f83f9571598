//! Scalar summaries of feature vectors: median, ncv, 95th percentile, slope.
//!
//! Quantiles use linear interpolation between closest ranks, so the quartiles
//! of `1..=5` are 2 and 4.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    None,
    Median,
    Ncv,
    P95,
    Slope,
}

impl Aggregation {
    /// The four statistics applied to every vector-valued feature.
    pub const VECTOR: [Aggregation; 4] =
        [Aggregation::Median, Aggregation::Ncv, Aggregation::P95, Aggregation::Slope];

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::None => "none",
            Aggregation::Median => "median",
            Aggregation::Ncv => "ncv",
            Aggregation::P95 => "p95",
            Aggregation::Slope => "slope",
        }
    }
}

/// Quantile of an ascending-sorted slice. `p` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    quantile_sorted(&sorted(values), p)
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

pub fn p95(values: &[f64]) -> Option<f64> {
    quantile(values, 0.95)
}

pub fn iqr(values: &[f64]) -> Option<f64> {
    let s = sorted(values);
    Some(quantile_sorted(&s, 0.75)? - quantile_sorted(&s, 0.25)?)
}

/// Non-parametric coefficient of variation, median / IQR. Missing when IQR is 0.
pub fn ncv(values: &[f64]) -> Option<f64> {
    let s = sorted(values);
    let spread = quantile_sorted(&s, 0.75)? - quantile_sorted(&s, 0.25)?;
    if spread == 0.0 {
        return None;
    }
    Some(quantile_sorted(&s, 0.5)? / spread)
}

/// Ordinary least-squares slope of `y` against `x`.
///
/// Missing with fewer than two points or when `x` has no spread.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        sxy += dx * (yi - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Slope against the position in the vector (0, 1, 2, ...).
pub fn index_slope(y: &[f64]) -> Option<f64> {
    let x: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
    ols_slope(&x, y)
}

/// A vector feature ready for aggregation.
///
/// `level` feeds median, ncv and p95; `signed` and `position` feed the slope.
/// They differ only for signed signals summarized by magnitude.
pub struct Series {
    pub level: Vec<f64>,
    pub signed: Vec<f64>,
    pub position: Vec<f64>,
}

impl Series {
    /// Per-stroke vector; slope is taken against stroke order.
    pub fn per_stroke(values: Vec<f64>) -> Self {
        let position = (0..values.len()).map(|i| i as f64).collect();
        Series { level: values.clone(), signed: values, position }
    }

    /// Per-sample vector; slope is taken against time in seconds.
    pub fn over_time(values: Vec<f64>, times: Vec<f64>) -> Self {
        Series { level: values.clone(), signed: values, position: times }
    }

    /// Per-sample signed vector summarized by its magnitude.
    pub fn magnitude_over_time(signed: Vec<f64>, times: Vec<f64>) -> Self {
        Series { level: signed.iter().map(|v| v.abs()).collect(), signed, position: times }
    }

    pub fn empty() -> Self {
        Series { level: Vec::new(), signed: Vec::new(), position: Vec::new() }
    }

    /// Median, ncv, p95 and slope, in that order.
    pub fn aggregate(&self) -> [Option<f64>; 4] {
        let s = sorted(&self.level);
        let median = quantile_sorted(&s, 0.5);
        let ncv = match (quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.75), median) {
            (Some(q1), Some(q3), Some(m)) if q3 - q1 != 0.0 => Some(m / (q3 - q1)),
            _ => None,
        };
        [median, ncv, quantile_sorted(&s, 0.95), ols_slope(&self.position, &self.signed)]
    }
}

/// Azimuth summaries that respect the 0/360 seam.
///
/// Angles are unwrapped into the half-open circle centred on their circular
/// mean direction; median and p95 of the unwrapped values are reported in
/// `[0, 360)`, IQR and slope are taken on the unwrapped values. A vanishing
/// mean resultant falls back to the raw angles.
pub fn circular_aggregate(degrees: &[f64], times: &[f64]) -> [Option<f64>; 4] {
    if degrees.is_empty() {
        return [None; 4];
    }
    let unwrapped = unwrap_around_mean(degrees);
    let s = sorted(&unwrapped);
    let wrap = |v: f64| v.rem_euclid(360.0);
    let median = quantile_sorted(&s, 0.5).map(wrap);
    let spread = quantile_sorted(&s, 0.75).zip(quantile_sorted(&s, 0.25)).map(|(a, b)| a - b);
    let ncv = match (median, spread) {
        (Some(m), Some(iqr)) if iqr != 0.0 => Some(m / iqr),
        _ => None,
    };
    [median, ncv, quantile_sorted(&s, 0.95).map(wrap), ols_slope(times, &unwrapped)]
}

pub fn unwrap_around_mean(degrees: &[f64]) -> Vec<f64> {
    let (mut sin, mut cos) = (0.0, 0.0);
    for d in degrees {
        let r = d.to_radians();
        sin += r.sin();
        cos += r.cos();
    }
    let n = degrees.len() as f64;
    if (sin / n).hypot(cos / n) < 1e-12 {
        return degrees.to_vec();
    }
    let centre = sin.atan2(cos).to_degrees();
    degrees
        .iter()
        .map(|d| centre + (d - centre + 180.0).rem_euclid(360.0) - 180.0)
        .collect()
}
