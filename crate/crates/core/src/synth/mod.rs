//! Synthetic cohorts with controlled dysgraphia-like group differences.
//!
//! Every subject carries a latent severity `s` in `[0, 1]`: intact children
//! draw it from `U(0, 0.4)`, dysgraphic ones from `U(0.6, 1.0)`. An effect
//! factor `f` acts on a subject as the multiplier `f^((s - 0.2) / 0.6)`, which
//! is 1 at the centre of the intact range and `f` at the centre of the
//! dysgraphic range. The ratio of the group medians therefore approaches `f`.
//!
//! A session is a row of on-surface strokes separated by in-air transitions,
//! with a short hover before the first and after the last stroke. Each
//! on-surface stroke is traced by integrating a heading whose rate is a
//! constant plus a sinusoid, then scaled to its target height. The turning
//! rate is exactly what the angular-velocity features measure, so its
//! dispersion can be set directly. In-air transitions follow a raised arc
//! whose length is chosen so the pen moves at the subject's in-air speed.


use crate::signal::{
    Diagnosis, HpsqcScore, PenStatus, Sample, Session, SessionMeta, Sex, HPSQC_LEGIBILITY_MAX,
    HPSQC_PERFORMANCE_TIME_MAX, HPSQC_WELL_BEING_MAX,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Multipliers applied at full dysgraphic severity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectFactors {
    /// Total in-air time.
    pub in_air_duration: f64,
    /// Number of pen elevations.
    pub interruption_rate: f64,
    /// On-surface stroke height.
    pub stroke_height: f64,
    /// Median/IQR of the on-surface angular velocity.
    pub angular_velocity_ncv: f64,
    /// In-air movement speed.
    pub in_air_tempo: f64,
}

impl Default for EffectFactors {
    fn default() -> Self {
        EffectFactors {
            in_air_duration: 1.6,
            interruption_rate: 1.4,
            stroke_height: 1.5,
            angular_velocity_ncv: 1.3,
            in_air_tempo: 0.7,
        }
    }
}

impl EffectFactors {
    /// No group differences at all.
    pub const NULL: EffectFactors = EffectFactors {
        in_air_duration: 1.0,
        interruption_rate: 1.0,
        stroke_height: 1.0,
        angular_velocity_ncv: 1.0,
        in_air_tempo: 1.0,
    };

    fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("in_air_duration", self.in_air_duration),
            ("interruption_rate", self.interruption_rate),
            ("stroke_height", self.stroke_height),
            ("angular_velocity_ncv", self.angular_velocity_ncv),
            ("in_air_tempo", self.in_air_tempo),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_intact: usize,
    pub n_dd: usize,
    pub seed: u64,
    pub factors: EffectFactors,
    /// Scales the between-subject variability.
    pub subject_noise: f64,
    /// Scales the stroke-to-stroke variability within a session.
    pub stroke_noise: f64,
    /// Standard deviation of the HPSQ-C sub-score noise, in points per 12
    /// points of range.
    pub hpsqc_noise: f64,
    /// Typical number of on-surface strokes of an unaffected child.
    pub strokes_per_session: usize,
    pub sampling_rate: f64,
    pub units_per_mm: f64,
    pub tick_rate: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_intact: 60,
            n_dd: 60,
            seed: 2024,
            factors: EffectFactors::default(),
            subject_noise: 1.0,
            stroke_noise: 1.0,
            hpsqc_noise: 1.0,
            strokes_per_session: 24,
            sampling_rate: 200.0,
            units_per_mm: 200.0,
            tick_rate: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid cohort spec: {0}")]
pub struct SynthError(pub String);

impl CohortSpec {
    /// Default spec with every effect switched off.
    pub fn null(seed: u64) -> Self {
        CohortSpec { seed, factors: EffectFactors::NULL, ..CohortSpec::default() }
    }

    pub fn n_subjects(&self) -> usize {
        self.n_intact + self.n_dd
    }

    pub fn check(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError(m));
        if self.n_intact < 1 || self.n_dd < 1 {
            return bad(format!("group sizes must be at least 1, got {} + {}", self.n_intact, self.n_dd));
        }
        for (name, f) in self.factors.named() {
            if !(f > 0.0 && f.is_finite()) {
                return bad(format!("factor {name} must be positive, got {f}"));
            }
        }
        for (name, v) in [
            ("subject_noise", self.subject_noise),
            ("stroke_noise", self.stroke_noise),
            ("hpsqc_noise", self.hpsqc_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.strokes_per_session < 2 {
            return bad("strokes_per_session must be at least 2".into());
        }
        for (name, v) in [
            ("sampling_rate", self.sampling_rate),
            ("units_per_mm", self.units_per_mm),
            ("tick_rate", self.tick_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.tick_rate < self.sampling_rate {
            return bad(format!(
                "tick_rate {} is below sampling_rate {}; timestamps would repeat",
                self.tick_rate, self.sampling_rate
            ));
        }
        Ok(())
    }
}

/// What the generator put into one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectTruth {
    pub subject_id: String,
    pub diagnosis: Diagnosis,
    pub severity: f64,
    pub hpsqc: HpsqcScore,
    /// Realized multipliers, in [`EffectFactors`] field order.
    pub multipliers: [f64; 5],
    pub on_surface_strokes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub spec: CohortSpec,
    pub sessions: Vec<Session>,
    pub truth: Vec<SubjectTruth>,
}

/// Subjects are numbered from 1; intact children come first.
pub fn subject_id(index: usize) -> String {
    format!("S{:04}", index + 1)
}

pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort, SynthError> {
    spec.check()?;
    let (sessions, truth) = (0..spec.n_subjects()).into_par_iter().map(|i| generate_subject(spec, i)).unzip();
    Ok(Cohort { spec: spec.clone(), sessions, truth })
}

impl Cohort {
    /// Writes one SVC file and sidecar per subject plus `truth.csv`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let paths = self.sessions.iter().map(|s| s.save(dir)).collect::<std::io::Result<Vec<_>>>()?;
        self.write_truth(std::fs::File::create(dir.join("truth.csv"))?, None)?;
        Ok(paths)
    }

    pub fn write_truth<W: Write>(&self, mut out: W, comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {}", c.replace('\n', " "))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "subject_id",
            "diagnosis",
            "severity",
            "hpsqc_total",
            "on_surface_strokes",
            "m_in_air_duration",
            "m_interruption_rate",
            "m_stroke_height",
            "m_angular_velocity_ncv",
            "m_in_air_tempo",
        ])?;
        for t in &self.truth {
            let mut rec = vec![
                t.subject_id.clone(),
                match t.diagnosis {
                    Diagnosis::Intact => "intact".to_string(),
                    Diagnosis::Dysgraphic => "dysgraphic".to_string(),
                },
                t.severity.to_string(),
                t.hpsqc.total.to_string(),
                t.on_surface_strokes.to_string(),
            ];
            rec.extend(t.multipliers.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn lognormal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    (sigma * gauss(rng)).exp()
}

/// Per-subject constants drawn once.
struct Subject {
    upm: f64,
    fs: f64,
    height: f64,
    turn_rate: f64,
    ncv: f64,
    gap: f64,
    air_speed: f64,
    stroke_duration: f64,
    pressure: f64,
    tilt: f64,
    azimuth: f64,
    stroke_noise: f64,
}

/// Samples of one pen-status run before timestamps are attached.
struct Run {
    pen: PenStatus,
    xy: Vec<(f64, f64)>,
}

/// Generates subject `index` from its own RNG stream.
pub fn generate_subject(spec: &CohortSpec, index: usize) -> (Session, SubjectTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let diagnosis = if index < spec.n_intact { Diagnosis::Intact } else { Diagnosis::Dysgraphic };
    let severity = match diagnosis {
        Diagnosis::Intact => rng.random_range(0.0..0.4),
        Diagnosis::Dysgraphic => rng.random_range(0.6..1.0),
    };
    let exponent = (severity - 0.2) / 0.6;
    let f = &spec.factors;
    let m = [
        f.in_air_duration.powf(exponent),
        f.interruption_rate.powf(exponent),
        f.stroke_height.powf(exponent),
        f.angular_velocity_ncv.powf(exponent),
        f.in_air_tempo.powf(exponent),
    ];
    let [m_air, m_int, m_height, m_ncv, m_tempo] = m;
    let sn = spec.subject_noise;
    let upm = spec.units_per_mm;

    let sex = if rng.random::<bool>() { Sex::Girl } else { Sex::Boy };
    let class_year = rng.random_range(3..=4u8);
    let subject = Subject {
        upm,
        fs: spec.sampling_rate,
        height: 8.0 * upm * m_height * lognormal(&mut rng, 0.12 * sn),
        turn_rate: 22.0 * lognormal(&mut rng, 0.1 * sn),
        ncv: 1.2 * m_ncv * lognormal(&mut rng, 0.05 * sn),
        // per-gap time; more gaps share the inflated in-air total
        gap: 0.22 * m_air / m_int * lognormal(&mut rng, 0.12 * sn),
        air_speed: 80.0 * upm * m_tempo * lognormal(&mut rng, 0.1 * sn),
        stroke_duration: 0.35 * lognormal(&mut rng, 0.1 * sn),
        pressure: 520.0 * lognormal(&mut rng, 0.12 * sn),
        tilt: 55.0 + 5.0 * sn * gauss(&mut rng),
        azimuth: 140.0 + 12.0 * sn * gauss(&mut rng),
        stroke_noise: spec.stroke_noise,
    };
    let n_on = ((spec.strokes_per_session as f64 * m_int * lognormal(&mut rng, 0.08 * sn)).round() as usize).max(2);

    let runs = trace_session(&subject, n_on, &mut rng);
    let samples = attach_time_and_pen(&subject, &runs, spec.tick_rate, &mut rng);
    let hpsqc = hpsqc_from_severity(severity, spec.hpsqc_noise, &mut rng);

    let id = subject_id(index);
    let mut meta = SessionMeta::new(id.clone());
    meta.sex = Some(sex);
    meta.class_year = Some(class_year);
    meta.diagnosis = Some(diagnosis);
    meta.hpsqc = Some(hpsqc);
    meta.tick_rate = spec.tick_rate;
    meta.units_per_mm = Some(upm);
    meta.sampling_rate = spec.sampling_rate;
    let truth = SubjectTruth { subject_id: id, diagnosis, severity, hpsqc, multipliers: m, on_surface_strokes: n_on };
    (Session::new(samples, meta), truth)
}

/// Sub-scores rise linearly with severity plus Gaussian noise, rounded and
/// clipped to their ranges. The total is their sum.
fn hpsqc_from_severity(severity: f64, noise: f64, rng: &mut ChaCha8Rng) -> HpsqcScore {
    let mut part = |max: u8| {
        let max = max as f64;
        let v = max * (0.1 + 0.75 * severity) + noise * max / 12.0 * gauss(rng);
        v.round().clamp(0.0, max) as u8
    };
    let (l, p, w) = (part(HPSQC_LEGIBILITY_MAX), part(HPSQC_PERFORMANCE_TIME_MAX), part(HPSQC_WELL_BEING_MAX));
    HpsqcScore::new(l, p, w).expect("clipped sub-scores are within range")
}

fn trace_session(s: &Subject, n_on: usize, rng: &mut ChaCha8Rng) -> Vec<Run> {
    let line_start = 10.0 * s.upm;
    let line_end = 160.0 * s.upm;
    let mut baseline = 200.0 * s.upm;
    let mut cursor = line_start;
    let mut strokes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n_on);
    for _ in 0..n_on {
        let mut xy = on_surface_shape(s, rng);
        let (x0, x1) = bounds(xy.iter().map(|p| p.0));
        let (y0, _) = bounds(xy.iter().map(|p| p.1));
        if cursor + (x1 - x0) > line_end && cursor > line_start {
            cursor = line_start;
            baseline -= 20.0 * s.upm;
        }
        for p in &mut xy {
            p.0 += cursor - x0;
            p.1 += baseline - y0;
        }
        cursor += x1 - x0 + 1.5 * s.upm * rng.random_range(0.8..1.2);
        strokes.push(xy);
    }

    let mut runs = Vec::with_capacity(2 * n_on + 1);
    let first = strokes[0][0];
    let hover_in = samples_for(0.3, s.fs);
    runs.push(Run { pen: PenStatus::InAir, xy: straight(offset(first, -5.0 * s.upm, 6.0 * s.upm), first, hover_in) });
    for i in 0..n_on {
        if i > 0 {
            let from = *runs.last().and_then(|r| r.xy.last()).expect("strokes are non-empty");
            let to = strokes[i][0];
            let duration = s.gap * lognormal(rng, 0.3 * s.stroke_noise);
            runs.push(Run { pen: PenStatus::InAir, xy: in_air_arc(s, from, to, samples_for(duration, s.fs)) });
        }
        runs.push(Run { pen: PenStatus::OnSurface, xy: std::mem::take(&mut strokes[i]) });
    }
    let last = *runs.last().and_then(|r| r.xy.last()).expect("session has samples");
    runs.push(Run { pen: PenStatus::InAir, xy: straight(last, offset(last, 4.0 * s.upm, 6.0 * s.upm), samples_for(0.2, s.fs)) });
    runs
}

fn samples_for(duration: f64, fs: f64) -> usize {
    ((duration * fs).round() as usize).max(4)
}

fn offset(p: (f64, f64), dx: f64, dy: f64) -> (f64, f64) {
    (p.0 + dx, p.1 + dy)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// `n` points strictly between `a` and `b`.
fn straight(a: (f64, f64), b: (f64, f64), n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|k| {
            let u = k as f64 / (n + 1) as f64;
            (a.0 + u * (b.0 - a.0), a.1 + u * (b.1 - a.1))
        })
        .collect()
}

/// One letter-like stroke, origin-free; positions are later shifted.
///
/// The heading rate is `c + A sin(2 pi k t / T + phi)` over whole periods, so
/// the sampled |rate| has median `c` and IQR `sqrt(2) A`.
fn on_surface_shape(s: &Subject, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let noise = s.stroke_noise;
    let duration = s.stroke_duration * lognormal(rng, 0.2 * noise);
    let n = ((duration * s.fs).round() as usize).max(12);
    let dt = 1.0 / s.fs;
    let period = n as f64 * dt;
    let c = s.turn_rate * lognormal(rng, 0.05 * noise);
    let a = c / (SQRT_2 * s.ncv);
    let cycles = rng.random_range(1..=2) as f64;
    let w = 2.0 * PI * cycles / period;
    let phase = rng.random_range(0.0..2.0 * PI);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let theta0 = rng.random_range(0.0..2.0 * PI);
    let speed_phase = rng.random_range(0.0..2.0 * PI);
    // heading at time t, integrated in closed form
    let heading = |t: f64| theta0 + sign * (c * t - a / w * ((w * t + phase).cos() - phase.cos()));

    let mut xy = Vec::with_capacity(n);
    let (mut x, mut y) = (0.0, 0.0);
    xy.push((x, y));
    for k in 0..n - 1 {
        let mid = (k as f64 + 0.5) * dt;
        let v = 1.0 + 0.25 * (2.0 * PI * mid / period + speed_phase).sin();
        let th = heading(mid);
        x += v * th.cos() * dt;
        y += v * th.sin() * dt;
        xy.push((x, y));
    }
    let (lo, hi) = bounds(xy.iter().map(|p| p.1));
    let target = s.height * lognormal(rng, 0.15 * noise);
    let scale = target / (hi - lo).max(1e-3 * (x.abs() + y.abs()).max(1e-9));
    // slow tremor a few device units wide
    let tremor = 1.5 * noise;
    let tremor_phase = rng.random_range(0.0..2.0 * PI);
    xy.iter()
        .enumerate()
        .map(|(k, &(x, y))| {
            let t = k as f64 * dt;
            let j = tremor * (2.0 * PI * 9.0 * t + tremor_phase).sin();
            (x * scale + j, y * scale + 0.7 * j)
        })
        .collect()
}

/// `n` hover samples from `a` to `b` along a raised half-sine arc, evenly
/// spaced in arc length so the pen moves at the subject's in-air speed.
fn in_air_arc(s: &Subject, a: (f64, f64), b: (f64, f64), n: usize) -> Vec<(f64, f64)> {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let chord = dx.hypot(dy);
    let length = (s.air_speed * (n + 1) as f64 / s.fs).max(1.02 * chord);
    if chord == 0.0 {
        return straight(a, b, n);
    }
    // unit normal on the upper side of the chord
    let (mut nx, mut ny) = (-dy / chord, dx / chord);
    if ny < 0.0 {
        nx = -nx;
        ny = -ny;
    }
    const DENSE: usize = 256;
    let polyline = |bump: f64| -> Vec<(f64, f64)> {
        (0..=DENSE)
            .map(|k| {
                let u = k as f64 / DENSE as f64;
                let h = bump * (PI * u).sin();
                (a.0 + u * dx + h * nx, a.1 + u * dy + h * ny)
            })
            .collect()
    };
    let arc_length = |pts: &[(f64, f64)]| pts.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, length);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if arc_length(&polyline(mid)) < length {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let pts = polyline(0.5 * (lo + hi));
    let mut cum = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in pts.windows(2) {
        acc += (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
        cum.push(acc);
    }
    let total = acc;
    (1..=n)
        .map(|k| {
            let target = total * k as f64 / (n + 1) as f64;
            let j = cum.partition_point(|&c| c < target).clamp(1, DENSE);
            let span = cum[j] - cum[j - 1];
            let u = if span > 0.0 { (target - cum[j - 1]) / span } else { 0.0 };
            (pts[j - 1].0 + u * (pts[j].0 - pts[j - 1].0), pts[j - 1].1 + u * (pts[j].1 - pts[j - 1].1))
        })
        .collect()
}

/// Quantizes positions, adds timestamps, pressure and pen angles.
fn attach_time_and_pen(s: &Subject, runs: &[Run], tick_rate: f64, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let total: usize = runs.iter().map(|r| r.xy.len()).sum();
    let mut samples = Vec::with_capacity(total);
    let start_tick = rng.random_range(0..100_000u64) as f64;
    let drift_phase = rng.random_range(0.0..2.0 * PI);
    let mut i = 0usize;
    for run in runs {
        let n = run.xy.len();
        let stroke_pressure = s.pressure * lognormal(rng, 0.1 * s.stroke_noise);
        for (k, &(x, y)) in run.xy.iter().enumerate() {
            let tick = start_tick + (i as f64 * tick_rate / s.fs).round();
            let t_sec = i as f64 / s.fs;
            let pressure = match run.pen {
                PenStatus::InAir => 0.0,
                PenStatus::OnSurface => {
                    let envelope = 0.35 + 0.65 * (PI * (k as f64 + 0.5) / n as f64).sin();
                    (stroke_pressure * envelope).round().max(1.0)
                }
            };
            let tilt = (s.tilt + 2.0 * (0.7 * t_sec + drift_phase).sin()).round().clamp(15.0, 85.0);
            let azimuth = (s.azimuth + 4.0 * (0.4 * t_sec + drift_phase).cos()).round().rem_euclid(360.0);
            samples.push(Sample {
                x: x.round(),
                y: y.round(),
                t: tick / tick_rate,
                pen: run.pen,
                pressure,
                tilt,
                azimuth,
            });
            i += 1;
        }
    }
    samples
}
