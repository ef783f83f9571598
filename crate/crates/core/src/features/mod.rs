//! The handwriting feature battery.
//!
//! Five families are extracted per session: temporal, kinematic, dynamic,
//! spatial and "other" (interruptions, pen stops, tempo, entropy). Vector
//! features are reduced to median, ncv, p95 and slope; see [`catalog`] for
//! the full list of names.
//!
//! Durations are computed from sample-owned intervals: every sample owns the
//! time until the next sample, and the last sample owns one nominal sampling
//! period. Stroke durations therefore partition the recording exactly.

mod aggregate;
mod catalog;
mod kinematics;
mod matrix;

pub use aggregate::{
    circular_aggregate, index_slope, iqr, median, ncv, ols_slope, p95, quantile, unwrap_around_mean, Aggregation,
    Series,
};
pub use catalog::{catalog, catalog_json, feature_names, FeatureGroup, FeatureSpec, FeatureSurface};
pub use kinematics::{angular_velocity, derivative, moving_average, StrokeKinematics, MIN_KINEMATIC_SAMPLES};
pub use matrix::{FeatureMatrix, MatrixError, RowMeta};

use crate::signal::{has_errors, segment_strokes, validate, Sample, Session, Stroke, Surface};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Bins per axis of the entropy histograms.
    pub entropy_bins: usize,
    /// Pen-stop speed threshold as a fraction of the on-surface p95 speed.
    pub pen_stop_speed_fraction: f64,
    /// Minimum pen-stop duration in seconds.
    pub pen_stop_min_duration: f64,
    /// Count hover before the first and after the last on-surface stroke as
    /// in-air movement.
    pub include_boundary_air: bool,
    /// Converts positions to millimetres when set.
    pub units_per_mm: Option<f64>,
    /// Centred moving-average window applied to positions before
    /// differentiation. `None` or 1 disables smoothing.
    pub smoothing_window: Option<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            entropy_bins: 32,
            pen_stop_speed_fraction: 0.1,
            pen_stop_min_duration: 0.030,
            include_boundary_air: false,
            units_per_mm: None,
            smoothing_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("session {subject}: no on-surface stroke")]
    NoOnSurface { subject: String },
    #[error("session {subject} failed validation: {details}")]
    Invalid { subject: String, details: String },
    #[error("invalid feature configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub name: String,
    /// `None` marks a missing value.
    pub value: Option<f64>,
    pub surface: FeatureSurface,
    pub aggregation: Aggregation,
}

/// Session data shared by all feature families.
struct Prepared<'a> {
    samples: &'a [Sample],
    strokes: Vec<Stroke<'a>>,
    owned_dt: Vec<f64>,
    stroke_duration: Vec<f64>,
    on: Vec<usize>,
    air: Vec<usize>,
    x: Vec<f64>,
    y: Vec<f64>,
    kinematics: Vec<Option<StrokeKinematics>>,
}

impl<'a> Prepared<'a> {
    fn new(session: &'a Session, config: &FeatureConfig) -> Result<Self, FeatureError> {
        if config.entropy_bins == 0 {
            return Err(FeatureError::Config("entropy_bins must be positive".into()));
        }
        if let Some(u) = config.units_per_mm {
            if !(u > 0.0 && u.is_finite()) {
                return Err(FeatureError::Config(format!("units_per_mm must be positive, got {u}")));
            }
        }
        let samples = session.samples.as_slice();
        let strokes = segment_strokes(samples);
        let on: Vec<usize> =
            strokes.iter().filter(|s| s.surface == Surface::OnSurface).map(|s| s.index).collect();
        let (Some(&first_on), Some(&last_on)) = (on.first(), on.last()) else {
            return Err(FeatureError::NoOnSurface { subject: session.subject_id().to_string() });
        };
        let air = strokes
            .iter()
            .filter(|s| s.surface == Surface::InAir)
            .filter(|s| config.include_boundary_air || (s.index > first_on && s.index < last_on))
            .map(|s| s.index)
            .collect();

        let n = samples.len();
        let mut owned_dt: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        owned_dt.push(1.0 / session.sampling_rate());
        debug_assert_eq!(owned_dt.len(), n);
        let stroke_duration =
            strokes.iter().map(|s| owned_dt[s.start..s.start + s.len()].iter().sum()).collect();

        let scale = config.units_per_mm.map_or(1.0, |u| 1.0 / u);
        let x: Vec<f64> = samples.iter().map(|s| s.x * scale).collect();
        let y: Vec<f64> = samples.iter().map(|s| s.y * scale).collect();
        let t: Vec<f64> = samples.iter().map(|s| s.t).collect();

        let mut prepared = Prepared {
            samples,
            strokes,
            owned_dt,
            stroke_duration,
            on,
            air,
            x,
            y,
            kinematics: Vec::new(),
        };
        let window = config.smoothing_window.unwrap_or(1);
        prepared.kinematics = prepared
            .strokes
            .iter()
            .map(|s| {
                let r = s.start..s.start + s.len();
                let xs = moving_average(&prepared.x[r.clone()], window);
                let ys = moving_average(&prepared.y[r.clone()], window);
                StrokeKinematics::compute(&xs, &ys, &t[r])
            })
            .collect();
        Ok(prepared)
    }

    fn strokes_of(&self, surface: Surface) -> &[usize] {
        match surface {
            Surface::OnSurface => &self.on,
            Surface::InAir => &self.air,
        }
    }

    fn total_duration(&self, surface: Surface) -> f64 {
        self.strokes_of(surface).iter().map(|&i| self.stroke_duration[i]).sum()
    }

    fn durations(&self, surface: Surface) -> Vec<f64> {
        self.strokes_of(surface).iter().map(|&i| self.stroke_duration[i]).collect()
    }

    fn sample_range(&self, stroke: usize) -> std::ops::Range<usize> {
        let s = &self.strokes[stroke];
        s.start..s.start + s.len()
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

fn label(group: FeatureGroup, values: Vec<Option<f64>>) -> Vec<FeatureValue> {
    let specs: Vec<&FeatureSpec> = catalog().iter().filter(|f| f.group == group).collect();
    assert_eq!(specs.len(), values.len(), "{group:?} values out of sync with the catalog");
    specs
        .into_iter()
        .zip(values)
        .map(|(spec, value)| FeatureValue {
            name: spec.name.clone(),
            value,
            surface: spec.surface,
            aggregation: spec.aggregation,
        })
        .collect()
}

fn temporal(p: &Prepared<'_>) -> Vec<Option<f64>> {
    let on = p.total_duration(Surface::OnSurface);
    let air = p.total_duration(Surface::InAir);
    let mut out = vec![Some(on + air), Some(on), Some(air), ratio(on, air)];
    let on_strokes = p.durations(Surface::OnSurface);
    let air_strokes = p.durations(Surface::InAir);
    out.extend(Series::per_stroke(on_strokes.clone()).aggregate());
    out.extend(Series::per_stroke(air_strokes.clone()).aggregate());
    out.push(match (median(&on_strokes), median(&air_strokes)) {
        (Some(a), Some(b)) => ratio(a, b),
        _ => None,
    });
    out
}

/// Kinematic signals of one surface, concatenated over its strokes.
#[derive(Default)]
struct SurfaceKinematics {
    t: Vec<f64>,
    vx: Vec<f64>,
    vy: Vec<f64>,
    speed: Vec<f64>,
    ax: Vec<f64>,
    ay: Vec<f64>,
    accel: Vec<f64>,
    omega: Vec<f64>,
    omega_t: Vec<f64>,
}

impl SurfaceKinematics {
    fn gather(p: &Prepared<'_>, surface: Surface) -> Option<Self> {
        let mut out = SurfaceKinematics::default();
        let mut any = false;
        for k in p.strokes_of(surface).iter().filter_map(|&i| p.kinematics[i].as_ref()) {
            any = true;
            out.t.extend(&k.t);
            out.vx.extend(&k.vx);
            out.vy.extend(&k.vy);
            out.speed.extend(&k.speed);
            out.ax.extend(&k.ax);
            out.ay.extend(&k.ay);
            out.accel.extend(&k.accel);
            out.omega.extend(&k.omega);
            out.omega_t.extend(&k.omega_t);
        }
        any.then_some(out)
    }
}

fn kinematic(p: &Prepared<'_>) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(56);
    for surface in [Surface::OnSurface, Surface::InAir] {
        let Some(k) = SurfaceKinematics::gather(p, surface) else {
            out.extend([None; 28]);
            continue;
        };
        let series = [
            Series::over_time(k.speed, k.t.clone()),
            Series::magnitude_over_time(k.vx, k.t.clone()),
            Series::magnitude_over_time(k.vy, k.t.clone()),
            Series::over_time(k.accel, k.t.clone()),
            Series::magnitude_over_time(k.ax, k.t.clone()),
            Series::magnitude_over_time(k.ay, k.t),
            Series::magnitude_over_time(k.omega, k.omega_t),
        ];
        for s in &series {
            out.extend(s.aggregate());
        }
    }
    out
}

fn dynamic(p: &Prepared<'_>) -> Vec<Option<f64>> {
    let on_samples: Vec<&Sample> = p.samples.iter().filter(|s| s.on_surface()).collect();
    let pressure = Series::over_time(
        on_samples.iter().map(|s| s.pressure).collect(),
        on_samples.iter().map(|s| s.t).collect(),
    );
    let times: Vec<f64> = p.samples.iter().map(|s| s.t).collect();
    let tilt = Series::over_time(p.samples.iter().map(|s| s.tilt).collect(), times.clone());
    let azimuth: Vec<f64> = p.samples.iter().map(|s| s.azimuth).collect();

    let mut out = Vec::with_capacity(12);
    out.extend(pressure.aggregate());
    out.extend(tilt.aggregate());
    out.extend(circular_aggregate(&azimuth, &times));
    out
}

fn extent(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn spatial(p: &Prepared<'_>) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(16);
    for surface in [Surface::OnSurface, Surface::InAir] {
        let strokes = p.strokes_of(surface);
        let widths = strokes.iter().map(|&i| extent(&p.x[p.sample_range(i)])).collect();
        let heights = strokes.iter().map(|&i| extent(&p.y[p.sample_range(i)])).collect();
        out.extend(Series::per_stroke(widths).aggregate());
        out.extend(Series::per_stroke(heights).aggregate());
    }
    out
}

/// Shannon entropy (bits) of a histogram given as counts.
fn entropy_of_counts(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.log2()
        })
        .sum();
    h.max(0.0)
}

/// Equal-width bin index over the min-max range of `values`.
fn bin_indices(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let range = extent(values);
    values
        .iter()
        .map(|v| {
            if range > 0.0 {
                (((v - lo) / range * bins as f64) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Histogram entropy of one coordinate, in bits.
pub fn histogram_entropy(values: &[f64], bins: usize) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut counts = vec![0usize; bins];
    for b in bin_indices(values, bins) {
        counts[b] += 1;
    }
    Some(entropy_of_counts(&counts))
}

/// Entropy of the `bins` x `bins` joint histogram of positions, in bits.
pub fn joint_entropy(x: &[f64], y: &[f64], bins: usize) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    let mut counts = vec![0usize; bins * bins];
    for (bx, by) in bin_indices(x, bins).into_iter().zip(bin_indices(y, bins)) {
        counts[bx * bins + by] += 1;
    }
    Some(entropy_of_counts(&counts))
}

fn other(p: &Prepared<'_>, config: &FeatureConfig) -> Vec<Option<f64>> {
    let interruptions = p
        .strokes
        .windows(2)
        .filter(|w| w[0].surface == Surface::OnSurface && w[1].surface == Surface::InAir)
        .count() as f64;
    let on_duration = p.total_duration(Surface::OnSurface);
    let air_duration = p.total_duration(Surface::InAir);
    let mut out = vec![Some(interruptions), ratio(interruptions, on_duration + air_duration)];

    match pen_stops(p, config) {
        Some(stops) => {
            out.push(Some(stops.len() as f64));
            out.extend(Series::per_stroke(stops).aggregate());
        }
        None => out.extend([None; 5]),
    }

    out.push(ratio(p.on.len() as f64, on_duration));
    out.push(if p.air.is_empty() { None } else { ratio(p.air.len() as f64, air_duration) });

    for surface in [Surface::OnSurface, Surface::InAir] {
        let idx: Vec<usize> = p.strokes_of(surface).iter().flat_map(|&i| p.sample_range(i)).collect();
        let xs: Vec<f64> = idx.iter().map(|&i| p.x[i]).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| p.y[i]).collect();
        out.push(joint_entropy(&xs, &ys, config.entropy_bins));
        out.push(histogram_entropy(&xs, config.entropy_bins));
        out.push(histogram_entropy(&ys, config.entropy_bins));
    }
    out
}

/// Durations of on-surface pen stops: maximal low-speed runs within a stroke
/// lasting at least the configured minimum. `None` when no on-surface stroke
/// is long enough for kinematics.
fn pen_stops(p: &Prepared<'_>, config: &FeatureConfig) -> Option<Vec<f64>> {
    let speeds: Vec<f64> =
        p.on.iter().filter_map(|&i| p.kinematics[i].as_ref()).flat_map(|k| k.speed.iter().copied()).collect();
    let threshold = config.pen_stop_speed_fraction * p95(&speeds)?;
    let mut stops = Vec::new();
    for &i in &p.on {
        let Some(k) = p.kinematics[i].as_ref() else { continue };
        let start = p.strokes[i].start;
        let mut run: Option<f64> = None;
        for (j, &v) in k.speed.iter().enumerate() {
            if v < threshold {
                *run.get_or_insert(0.0) += p.owned_dt[start + j];
            } else if let Some(d) = run.take() {
                if d >= config.pen_stop_min_duration {
                    stops.push(d);
                }
            }
        }
        if let Some(d) = run {
            if d >= config.pen_stop_min_duration {
                stops.push(d);
            }
        }
    }
    Some(stops)
}

pub fn temporal_features(session: &Session, config: &FeatureConfig) -> Result<Vec<FeatureValue>, FeatureError> {
    let p = Prepared::new(session, config)?;
    Ok(label(FeatureGroup::Temporal, temporal(&p)))
}

pub fn kinematic_features(session: &Session, config: &FeatureConfig) -> Result<Vec<FeatureValue>, FeatureError> {
    let p = Prepared::new(session, config)?;
    Ok(label(FeatureGroup::Kinematic, kinematic(&p)))
}

pub fn dynamic_features(session: &Session, config: &FeatureConfig) -> Result<Vec<FeatureValue>, FeatureError> {
    let p = Prepared::new(session, config)?;
    Ok(label(FeatureGroup::Dynamic, dynamic(&p)))
}

pub fn spatial_features(session: &Session, config: &FeatureConfig) -> Result<Vec<FeatureValue>, FeatureError> {
    let p = Prepared::new(session, config)?;
    Ok(label(FeatureGroup::Spatial, spatial(&p)))
}

pub fn other_features(session: &Session, config: &FeatureConfig) -> Result<Vec<FeatureValue>, FeatureError> {
    let p = Prepared::new(session, config)?;
    Ok(label(FeatureGroup::Other, other(&p, config)))
}

/// All features of one session in catalog order.
pub fn extract_session(session: &Session, config: &FeatureConfig) -> Result<Vec<FeatureValue>, FeatureError> {
    let p = Prepared::new(session, config)?;
    let mut out = label(FeatureGroup::Temporal, temporal(&p));
    out.extend(label(FeatureGroup::Kinematic, kinematic(&p)));
    out.extend(label(FeatureGroup::Dynamic, dynamic(&p)));
    out.extend(label(FeatureGroup::Spatial, spatial(&p)));
    out.extend(label(FeatureGroup::Other, other(&p, config)));
    Ok(out)
}

/// Looks up one feature by name in an extracted list.
pub fn value_of(features: &[FeatureValue], name: &str) -> Option<f64> {
    features.iter().find(|f| f.name == name).and_then(|f| f.value)
}

/// Validates and extracts every session; rows keep the input order.
pub fn extract_all(sessions: &[Session], config: &FeatureConfig) -> Result<FeatureMatrix, FeatureError> {
    let rows: Vec<Vec<Option<f64>>> = sessions
        .par_iter()
        .map(|session| {
            let diagnostics = validate(session);
            if has_errors(&diagnostics) {
                let details = diagnostics
                    .iter()
                    .filter(|d| d.severity == crate::signal::Severity::Error)
                    .map(|d| d.message.clone())
                    .collect::<Vec<_>>()
                    .join("; ");
                return Err(FeatureError::Invalid { subject: session.subject_id().to_string(), details });
            }
            Ok(extract_session(session, config)?.into_iter().map(|f| f.value).collect())
        })
        .collect::<Result<_, _>>()?;
    let meta = sessions.iter().map(RowMeta::of).collect();
    Ok(FeatureMatrix::new(feature_names(), meta, rows).expect("rows match the catalog"))
}
