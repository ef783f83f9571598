//! The canonical feature catalog.
//!
//! Names follow `<signal>[:<projection>]:<surface>:<aggregation>`, e.g.
//! `velocity:vertical:on_surface:p95`. Catalog order is the column order of
//! every [`FeatureMatrix`](super::FeatureMatrix).
//!
//! Size: 24 vector signals x 4 aggregations + 16 scalars = 112 features.

use super::Aggregation;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSurface {
    OnSurface,
    InAir,
    Global,
}

impl FeatureSurface {
    pub fn name(self) -> &'static str {
        match self {
            FeatureSurface::OnSurface => "on_surface",
            FeatureSurface::InAir => "in_air",
            FeatureSurface::Global => "global",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Temporal,
    Kinematic,
    Dynamic,
    Spatial,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub group: FeatureGroup,
    pub signal: String,
    pub projection: Option<String>,
    pub surface: FeatureSurface,
    pub aggregation: Aggregation,
    pub unit: String,
    pub description: String,
    /// Emitted for completeness but not part of the conventional battery.
    pub nonstandard: bool,
}

/// Spatial unit label: raw device units, or mm when `units_per_mm` is set.
const U: &str = "u";

struct Builder(Vec<FeatureSpec>);

impl Builder {
    fn scalar(&mut self, group: FeatureGroup, signal: &str, projection: Option<&str>, surface: FeatureSurface, unit: &str, description: &str) {
        self.push(group, signal, projection, surface, Aggregation::None, unit.to_string(), description.to_string(), false);
    }

    /// The four aggregations of a vector signal. `per_stroke` vectors take
    /// their slope against stroke order, the others against time.
    #[allow(clippy::too_many_arguments)]
    fn vector(&mut self, group: FeatureGroup, signal: &str, projection: Option<&str>, surface: FeatureSurface, unit: &str, per_stroke: bool, description: &str, nonstandard: bool) {
        for agg in Aggregation::VECTOR {
            let (u, what) = match agg {
                Aggregation::Median => (unit.to_string(), "median of"),
                Aggregation::Ncv => ("1".to_string(), "median/IQR of"),
                Aggregation::P95 => (unit.to_string(), "95th percentile of"),
                Aggregation::Slope if per_stroke => (format!("{unit}/stroke"), "slope over stroke order of"),
                Aggregation::Slope => (format!("{unit}/s"), "slope over time of"),
                Aggregation::None => unreachable!(),
            };
            self.push(group, signal, projection, surface, agg, u, format!("{what} {description}"), nonstandard);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, group: FeatureGroup, signal: &str, projection: Option<&str>, surface: FeatureSurface, aggregation: Aggregation, unit: String, description: String, nonstandard: bool) {
        let name = match projection {
            Some(p) => format!("{signal}:{p}:{}:{}", surface.name(), aggregation.name()),
            None => format!("{signal}:{}:{}", surface.name(), aggregation.name()),
        };
        self.0.push(FeatureSpec {
            name,
            group,
            signal: signal.to_string(),
            projection: projection.map(str::to_string),
            surface,
            aggregation,
            unit,
            description,
            nonstandard,
        });
    }
}

fn build() -> Vec<FeatureSpec> {
    use FeatureGroup::*;
    use FeatureSurface::*;
    let mut b = Builder(Vec::new());
    let surfaces = [(OnSurface, "on-surface"), (InAir, "in-air")];

    b.scalar(Temporal, "duration_writing", None, Global, "s", "duration of writing (on-surface plus in-air)");
    b.scalar(Temporal, "duration_writing", None, OnSurface, "s", "total on-surface duration");
    b.scalar(Temporal, "duration_writing", None, InAir, "s", "total in-air duration");
    b.scalar(Temporal, "duration_ratio", None, Global, "1", "on-surface duration / in-air duration");
    for (s, label) in surfaces {
        b.vector(Temporal, "stroke_duration", None, s, "s", true, &format!("{label} stroke durations"), false);
    }
    b.scalar(Temporal, "stroke_duration_ratio", None, Global, "1", "median on-surface / median in-air stroke duration");

    for (s, label) in surfaces {
        let kinematic: [(&str, Option<&str>, String, &str); 7] = [
            ("velocity", None, format!("{U}/s"), "speed"),
            ("velocity", Some("horizontal"), format!("{U}/s"), "|horizontal velocity|"),
            ("velocity", Some("vertical"), format!("{U}/s"), "|vertical velocity|"),
            ("acceleration", None, format!("{U}/s^2"), "acceleration magnitude"),
            ("acceleration", Some("horizontal"), format!("{U}/s^2"), "|horizontal acceleration|"),
            ("acceleration", Some("vertical"), format!("{U}/s^2"), "|vertical acceleration|"),
            ("angular_velocity", None, "rad/s".to_string(), "|angular velocity|"),
        ];
        for (signal, projection, unit, what) in kinematic {
            b.vector(Kinematic, signal, projection, s, &unit, false, &format!("{label} {what}"), false);
        }
    }

    b.vector(Dynamic, "pressure", None, OnSurface, "u", false, "on-surface pressure", false);
    b.vector(Dynamic, "tilt", None, Global, "deg", false, "pen tilt (altitude)", false);
    b.vector(Dynamic, "azimuth", None, Global, "deg", false, "pen azimuth, unwrapped around its circular mean", false);

    for (s, label) in surfaces {
        let nonstandard = s == InAir;
        b.vector(Spatial, "stroke_width", None, s, U, true, &format!("{label} stroke widths"), nonstandard);
        b.vector(Spatial, "stroke_height", None, s, U, true, &format!("{label} stroke heights"), nonstandard);
    }

    b.scalar(Other, "interruptions", None, Global, "1", "number of pen elevations");
    b.scalar(Other, "interruptions_relative", None, Global, "1/s", "pen elevations per second of writing");
    b.scalar(Other, "pen_stops", None, OnSurface, "1", "number of on-surface pen stops");
    b.vector(Other, "pen_stop_duration", None, OnSurface, "s", true, "pen stop durations", false);
    b.scalar(Other, "tempo", None, OnSurface, "1/s", "on-surface strokes per second of on-surface movement");
    b.scalar(Other, "tempo", None, InAir, "1/s", "in-air strokes per second of in-air movement");
    for (s, label) in surfaces {
        b.scalar(Other, "entropy", None, s, "bit", &format!("Shannon entropy of the {label} 2-D position histogram"));
        b.scalar(Other, "entropy", Some("horizontal"), s, "bit", &format!("Shannon entropy of the {label} x histogram"));
        b.scalar(Other, "entropy", Some("vertical"), s, "bit", &format!("Shannon entropy of the {label} y histogram"));
    }
    b.0
}

/// All features, in canonical order.
pub fn catalog() -> &'static [FeatureSpec] {
    static CATALOG: OnceLock<Vec<FeatureSpec>> = OnceLock::new();
    CATALOG.get_or_init(build)
}

pub fn feature_names() -> Vec<String> {
    catalog().iter().map(|f| f.name.clone()).collect()
}

pub fn catalog_json() -> String {
    serde_json::to_string_pretty(catalog()).expect("catalog serializes")
}
