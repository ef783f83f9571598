use super::{PenStatus, Session};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    EmptySession,
    NonFinite,
    NonMonotoneTime,
    NegativePressure,
    PressureInAir,
    TiltRange,
    AzimuthRange,
    NoOnSurface,
    HpsqcInconsistent,
    BadSamplingRate,
}

impl DiagnosticCode {
    pub fn severity(self) -> Severity {
        match self {
            DiagnosticCode::PressureInAir | DiagnosticCode::TiltRange | DiagnosticCode::AzimuthRange => {
                Severity::Warning
            }
            _ => Severity::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub severity: Severity,
    /// Offending sample, when the problem is local to one.
    pub index: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    fn new(code: DiagnosticCode, index: Option<usize>, message: impl Into<String>) -> Self {
        Diagnostic { code, severity: code.severity(), index, message: message.into() }
    }
}

/// Checks a session against the recording invariants.
///
/// Errors make the session unusable for feature extraction; warnings flag
/// device quirks (hover pressure, angles outside their nominal ranges) that
/// extraction tolerates.
pub fn validate(session: &Session) -> Vec<Diagnostic> {
    use DiagnosticCode::*;
    let mut out = Vec::new();
    let samples = &session.samples;
    if samples.is_empty() {
        out.push(Diagnostic::new(EmptySession, None, "session has no samples"));
        return out;
    }
    if !(session.meta.sampling_rate > 0.0 && session.meta.sampling_rate.is_finite()) {
        out.push(Diagnostic::new(BadSamplingRate, None, "sampling rate must be positive"));
    }
    for (i, s) in samples.iter().enumerate() {
        let fields = [s.x, s.y, s.t, s.pressure, s.tilt, s.azimuth];
        if fields.iter().any(|v| !v.is_finite()) {
            out.push(Diagnostic::new(NonFinite, Some(i), "non-finite sample value"));
            continue;
        }
        if i > 0 && s.t <= samples[i - 1].t {
            out.push(Diagnostic::new(
                NonMonotoneTime,
                Some(i),
                format!("t = {} not after {}", s.t, samples[i - 1].t),
            ));
        }
        if s.pressure < 0.0 {
            out.push(Diagnostic::new(NegativePressure, Some(i), "negative pressure"));
        } else if s.pen == PenStatus::InAir && s.pressure > 0.0 {
            out.push(Diagnostic::new(
                PressureInAir,
                Some(i),
                format!("pressure {} while pen is in the air", s.pressure),
            ));
        }
        if !(0.0..=90.0).contains(&s.tilt) {
            out.push(Diagnostic::new(TiltRange, Some(i), format!("tilt {} outside [0, 90]", s.tilt)));
        }
        if !(0.0..360.0).contains(&s.azimuth) {
            out.push(Diagnostic::new(
                AzimuthRange,
                Some(i),
                format!("azimuth {} outside [0, 360)", s.azimuth),
            ));
        }
    }
    if !samples.iter().any(|s| s.on_surface()) {
        out.push(Diagnostic::new(NoOnSurface, None, "no on-surface samples"));
    }
    if let Some(score) = &session.meta.hpsqc {
        if let Err(e) = score.check() {
            out.push(Diagnostic::new(HpsqcInconsistent, None, e.to_string()));
        }
    }
    out
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::tests::sample;
    use crate::signal::SessionMeta;

    fn session(samples: Vec<crate::signal::Sample>) -> Session {
        Session::new(samples, SessionMeta::new("v"))
    }

    #[test]
    fn clean_session_has_no_diagnostics() {
        let s = session(vec![sample(0.0, 1), sample(0.005, 0), sample(0.01, 1)]);
        assert!(validate(&s).is_empty());
    }

    #[test]
    fn duplicated_timestamp_is_reported_at_its_index() {
        let s = session(vec![sample(0.0, 1), sample(0.005, 1), sample(0.005, 1)]);
        let d = validate(&s);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagnosticCode::NonMonotoneTime);
        assert_eq!(d[0].index, Some(2));
        assert!(has_errors(&d));
    }

    #[test]
    fn hover_pressure_is_a_warning() {
        let mut air = sample(0.005, 0);
        air.pressure = 12.0;
        let d = validate(&session(vec![sample(0.0, 1), air]));
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].code, d[0].index), (DiagnosticCode::PressureInAir, Some(1)));
        assert!(!has_errors(&d));
    }

    #[test]
    fn hover_only_and_empty_sessions_are_errors() {
        let d = validate(&session(vec![sample(0.0, 0)]));
        assert_eq!(d[0].code, DiagnosticCode::NoOnSurface);
        assert_eq!(validate(&session(vec![]))[0].code, DiagnosticCode::EmptySession);
    }

    #[test]
    fn validation_does_not_mutate() {
        let s = session(vec![sample(0.0, 1), sample(0.0, 1)]);
        let before = s.clone();
        let _ = validate(&s);
        assert_eq!(s, before);
    }
}
