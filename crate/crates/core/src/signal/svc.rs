//! SVC text format and the JSON sidecar carrying session metadata.
//!
//! ```text
//! 3
//! 1200 3400 100000 1 240 50 512
//! 1203 3398 100005 1 240 50 530
//! 1207 3391 100010 0 241 51 0
//! ```
//!
//! Line 1 holds the sample count; every following line is
//! `x y t pen_status azimuth tilt pressure`, all integers, with `t` in device
//! ticks. The sidecar's `tick_rate` (ticks per second) converts ticks to seconds.

use super::{Diagnosis, HpsqcScore, PenStatus, Sample, Sex, NOMINAL_SAMPLING_RATE};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Millisecond timestamps.
pub const DEFAULT_TICK_RATE: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SvcError {
    #[error("empty SVC input")]
    Empty,
    #[error("line {line}: invalid sample count header {content:?}")]
    BadHeader { line: usize, content: String },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: pen status {value} is not 0 or 1")]
    PenStatus { line: usize, value: i64 },
    #[error("line {line}: timestamp {t} does not increase (previous {previous})")]
    NonMonotoneTime { line: usize, t: i64, previous: i64 },
    #[error("header declares {expected} samples but {found} data lines follow")]
    CountMismatch { expected: usize, found: usize },
    #[error("invalid sidecar: {0}")]
    Sidecar(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl SvcError {
    /// 1-based line number of the offending line, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            SvcError::BadHeader { line, .. }
            | SvcError::Malformed { line, .. }
            | SvcError::PenStatus { line, .. }
            | SvcError::NonMonotoneTime { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Parses SVC text into samples, converting ticks to seconds with `tick_rate`.
pub fn parse_svc(input: &str, tick_rate: f64) -> Result<Vec<Sample>, SvcError> {
    if !(tick_rate > 0.0 && tick_rate.is_finite()) {
        return Err(SvcError::Sidecar(format!("tick_rate must be positive, got {tick_rate}")));
    }
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines.next().ok_or(SvcError::Empty)?;
    let expected: usize = header.parse().map_err(|_| SvcError::BadHeader {
        line: header_line,
        content: header.to_string(),
    })?;

    let mut samples = Vec::with_capacity(expected);
    let mut previous_tick: Option<i64> = None;
    for (line, text) in lines {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(SvcError::Malformed {
                line,
                reason: format!("expected 7 columns, found {}", fields.len()),
            });
        }
        let mut values = [0i64; 7];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| SvcError::Malformed {
                line,
                reason: format!("{field:?} is not an integer"),
            })?;
        }
        let [x, y, tick, pen, azimuth, tilt, pressure] = values;
        let pen = PenStatus::from_code(pen).ok_or(SvcError::PenStatus { line, value: pen })?;
        if let Some(prev) = previous_tick {
            if tick <= prev {
                return Err(SvcError::NonMonotoneTime { line, t: tick, previous: prev });
            }
        }
        previous_tick = Some(tick);
        samples.push(Sample {
            x: x as f64,
            y: y as f64,
            t: tick as f64 / tick_rate,
            pen,
            pressure: pressure as f64,
            tilt: tilt as f64,
            azimuth: azimuth as f64,
        });
    }

    if samples.len() != expected {
        return Err(SvcError::CountMismatch { expected, found: samples.len() });
    }
    if samples.is_empty() {
        return Err(SvcError::Empty);
    }
    Ok(samples)
}

/// Writes samples in canonical SVC form: single spaces, `\n` line endings,
/// values rounded to integers and times converted back to ticks.
pub fn serialize_svc(samples: &[Sample], tick_rate: f64) -> String {
    let mut out = String::with_capacity(samples.len() * 40 + 16);
    let _ = writeln!(out, "{}", samples.len());
    for s in samples {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            s.x.round() as i64,
            s.y.round() as i64,
            (s.t * tick_rate).round() as i64,
            s.pen.code(),
            s.azimuth.round() as i64,
            s.tilt.round() as i64,
            s.pressure.round() as i64,
        );
    }
    out
}

/// Per-session metadata stored next to the SVC file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub subject_id: String,
    #[serde(default)]
    pub sex: Option<Sex>,
    #[serde(default)]
    pub class_year: Option<u8>,
    #[serde(default)]
    pub diagnosis: Option<Diagnosis>,
    #[serde(default)]
    pub hpsqc: Option<HpsqcScore>,
    #[serde(default = "default_tick_rate")]
    pub tick_rate: f64,
    #[serde(default)]
    pub units_per_mm: Option<f64>,
    #[serde(default = "default_sampling_rate")]
    pub sampling_rate: f64,
}

fn default_tick_rate() -> f64 {
    DEFAULT_TICK_RATE
}

fn default_sampling_rate() -> f64 {
    NOMINAL_SAMPLING_RATE
}

impl SessionMeta {
    pub fn new(subject_id: impl Into<String>) -> Self {
        SessionMeta {
            subject_id: subject_id.into(),
            sex: None,
            class_year: None,
            diagnosis: None,
            hpsqc: None,
            tick_rate: DEFAULT_TICK_RATE,
            units_per_mm: None,
            sampling_rate: NOMINAL_SAMPLING_RATE,
        }
    }

    pub fn from_json(raw: &str) -> Result<Self, SvcError> {
        let meta: SessionMeta =
            serde_json::from_str(raw).map_err(|e| SvcError::Sidecar(e.to_string()))?;
        if let Some(score) = &meta.hpsqc {
            score.check().map_err(|e| SvcError::Sidecar(e.to_string()))?;
        }
        if let Some(year) = meta.class_year {
            if !(3..=4).contains(&year) {
                return Err(SvcError::Sidecar(format!("class_year {year} is not 3 or 4")));
            }
        }
        if !(meta.sampling_rate > 0.0) {
            return Err(SvcError::Sidecar("sampling_rate must be positive".into()));
        }
        Ok(meta)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metadata serializes");
        s.push('\n');
        s
    }
}
