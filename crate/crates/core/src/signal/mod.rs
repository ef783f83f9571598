//! Recording types, SVC ingestion and stroke segmentation.
//!
//! A [`Session`] is one child's recording of the copy task: an ordered list of
//! tablet [`Sample`]s plus demographics, the counsellor's diagnosis and the
//! HPSQ-C self-assessment. Strokes are maximal runs of samples sharing the
//! same pen status, so on-surface and in-air strokes alternate.

mod svc;
mod validate;

pub use svc::{parse_svc, serialize_svc, SessionMeta, SvcError, DEFAULT_TICK_RATE};
pub use validate::{has_errors, validate, Diagnostic, DiagnosticCode, Severity};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Nominal sampling frequency of the display tablet, in Hz.
pub const NOMINAL_SAMPLING_RATE: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenStatus {
    InAir,
    OnSurface,
}

impl PenStatus {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(PenStatus::InAir),
            1 => Some(PenStatus::OnSurface),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            PenStatus::InAir => 0,
            PenStatus::OnSurface => 1,
        }
    }
}

/// One tablet reading.
///
/// Positions and pressure are raw device units, `t` is in seconds, `tilt` and
/// `azimuth` are degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub pen: PenStatus,
    pub pressure: f64,
    pub tilt: f64,
    pub azimuth: f64,
}

impl Sample {
    pub fn on_surface(&self) -> bool {
        self.pen == PenStatus::OnSurface
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Girl,
    Boy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnosis {
    Intact,
    Dysgraphic,
}

impl Diagnosis {
    /// 0 for intact, 1 for dysgraphic.
    pub fn code(self) -> f64 {
        match self {
            Diagnosis::Intact => 0.0,
            Diagnosis::Dysgraphic => 1.0,
        }
    }
}

/// Theoretical maxima of the HPSQ-C sub-scores.
pub const HPSQC_LEGIBILITY_MAX: u8 = 12;
pub const HPSQC_PERFORMANCE_TIME_MAX: u8 = 12;
pub const HPSQC_WELL_BEING_MAX: u8 = 16;
pub const HPSQC_TOTAL_MAX: u8 = 40;

/// HPSQ-C questionnaire result. Higher means worse self-assessed proficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HpsqcScore {
    pub legibility: u8,
    pub performance_time: u8,
    pub well_being: u8,
    pub total: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid HPSQ-C score: {0}")]
pub struct HpsqcError(String);

impl HpsqcScore {
    /// Builds a score from its three factors; the total is their sum.
    pub fn new(legibility: u8, performance_time: u8, well_being: u8) -> Result<Self, HpsqcError> {
        let score = HpsqcScore {
            legibility,
            performance_time,
            well_being,
            total: legibility + performance_time + well_being,
        };
        score.check()?;
        Ok(score)
    }

    pub fn check(&self) -> Result<(), HpsqcError> {
        let limits = [
            ("legibility", self.legibility, HPSQC_LEGIBILITY_MAX),
            ("performance_time", self.performance_time, HPSQC_PERFORMANCE_TIME_MAX),
            ("well_being", self.well_being, HPSQC_WELL_BEING_MAX),
            ("total", self.total, HPSQC_TOTAL_MAX),
        ];
        for (name, value, max) in limits {
            if value > max {
                return Err(HpsqcError(format!("{name} = {value} exceeds {max}")));
            }
        }
        let sum = self.legibility as u16 + self.performance_time as u16 + self.well_being as u16;
        if sum != self.total as u16 {
            return Err(HpsqcError(format!(
                "total {} differs from sum of sub-scores {sum}",
                self.total
            )));
        }
        Ok(())
    }

    pub fn get(&self, part: ScorePart) -> u8 {
        match part {
            ScorePart::Legibility => self.legibility,
            ScorePart::PerformanceTime => self.performance_time,
            ScorePart::WellBeing => self.well_being,
            ScorePart::Total => self.total,
        }
    }
}

/// One of the four HPSQ-C scores used as a regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorePart {
    Legibility,
    PerformanceTime,
    WellBeing,
    Total,
}

impl ScorePart {
    pub const ALL: [ScorePart; 4] = [
        ScorePart::Legibility,
        ScorePart::PerformanceTime,
        ScorePart::WellBeing,
        ScorePart::Total,
    ];

    /// Width of the theoretical score range (all scores start at 0).
    pub fn range(self) -> f64 {
        f64::from(match self {
            ScorePart::Legibility => HPSQC_LEGIBILITY_MAX,
            ScorePart::PerformanceTime => HPSQC_PERFORMANCE_TIME_MAX,
            ScorePart::WellBeing => HPSQC_WELL_BEING_MAX,
            ScorePart::Total => HPSQC_TOTAL_MAX,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScorePart::Legibility => "legibility",
            ScorePart::PerformanceTime => "performance_time",
            ScorePart::WellBeing => "well_being",
            ScorePart::Total => "total",
        }
    }
}

impl fmt::Display for ScorePart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A full recording of one child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub samples: Vec<Sample>,
    pub meta: SessionMeta,
}

impl Session {
    pub fn new(samples: Vec<Sample>, meta: SessionMeta) -> Self {
        Session { samples, meta }
    }

    pub fn subject_id(&self) -> &str {
        &self.meta.subject_id
    }

    pub fn sampling_rate(&self) -> f64 {
        self.meta.sampling_rate
    }

    /// Reads `<stem>.svc` together with its `<stem>.json` sidecar.
    ///
    /// A missing sidecar yields default metadata with the file stem as subject id.
    pub fn load(svc_path: &Path) -> Result<Session, SvcError> {
        let text = std::fs::read_to_string(svc_path).map_err(|e| SvcError::Io {
            path: svc_path.display().to_string(),
            message: e.to_string(),
        })?;
        let sidecar = svc_path.with_extension("json");
        let meta = if sidecar.exists() {
            let raw = std::fs::read_to_string(&sidecar).map_err(|e| SvcError::Io {
                path: sidecar.display().to_string(),
                message: e.to_string(),
            })?;
            SessionMeta::from_json(&raw)?
        } else {
            let stem = svc_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            SessionMeta::new(stem)
        };
        let samples = parse_svc(&text, meta.tick_rate)?;
        Ok(Session { samples, meta })
    }

    /// Writes `<dir>/<subject_id>.svc` and the matching sidecar.
    pub fn save(&self, dir: &Path) -> std::io::Result<std::path::PathBuf> {
        let svc_path = dir.join(format!("{}.svc", self.meta.subject_id));
        std::fs::write(&svc_path, serialize_svc(&self.samples, self.meta.tick_rate))?;
        std::fs::write(svc_path.with_extension("json"), self.meta.to_json())?;
        Ok(svc_path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    OnSurface,
    InAir,
}

impl Surface {
    pub fn name(self) -> &'static str {
        match self {
            Surface::OnSurface => "on_surface",
            Surface::InAir => "in_air",
        }
    }

    fn of(pen: PenStatus) -> Self {
        match pen {
            PenStatus::OnSurface => Surface::OnSurface,
            PenStatus::InAir => Surface::InAir,
        }
    }
}

/// A maximal run of samples with constant pen status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stroke<'a> {
    pub surface: Surface,
    pub samples: &'a [Sample],
    /// Position of the stroke within the session, counting both surfaces.
    pub index: usize,
    /// Index of the first sample within the session.
    pub start: usize,
}

impl Stroke<'_> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Splits the session into alternating on-surface and in-air strokes.
///
/// Every sample belongs to exactly one stroke; leading and trailing hover is
/// kept as in-air strokes.
pub fn segment_strokes(samples: &[Sample]) -> Vec<Stroke<'_>> {
    let mut strokes = Vec::new();
    let mut start = 0;
    for end in 1..=samples.len() {
        if end == samples.len() || samples[end].pen != samples[start].pen {
            strokes.push(Stroke {
                surface: Surface::of(samples[start].pen),
                samples: &samples[start..end],
                index: strokes.len(),
                start,
            });
            start = end;
        }
    }
    strokes
}
