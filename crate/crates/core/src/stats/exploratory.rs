use super::{complete_pairs, fdr_bh, mann_whitney_u, spearman, StatResult, StatsError, TestKind};
use crate::features::{FeatureMatrix, RowMeta};
use crate::signal::{Diagnosis, ScorePart};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;

/// What the features are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Diagnosis,
    Legibility,
    PerformanceTime,
    WellBeing,
    Total,
}

impl Target {
    pub const ALL: [Target; 5] = [
        Target::Diagnosis,
        Target::Legibility,
        Target::PerformanceTime,
        Target::WellBeing,
        Target::Total,
    ];

    pub fn score(part: ScorePart) -> Self {
        match part {
            ScorePart::Legibility => Target::Legibility,
            ScorePart::PerformanceTime => Target::PerformanceTime,
            ScorePart::WellBeing => Target::WellBeing,
            ScorePart::Total => Target::Total,
        }
    }

    pub fn score_part(self) -> Option<ScorePart> {
        match self {
            Target::Diagnosis => None,
            Target::Legibility => Some(ScorePart::Legibility),
            Target::PerformanceTime => Some(ScorePart::PerformanceTime),
            Target::WellBeing => Some(ScorePart::WellBeing),
            Target::Total => Some(ScorePart::Total),
        }
    }

    pub fn is_binary(self) -> bool {
        self == Target::Diagnosis
    }

    pub fn name(self) -> &'static str {
        self.score_part().map_or("diagnosis", ScorePart::name)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Target::ALL.into_iter().find(|t| t.name() == s)
    }

    /// Numeric target of one row: 0/1 diagnosis code or the HPSQ-C score.
    pub fn value(self, meta: &RowMeta) -> Option<f64> {
        match self.score_part() {
            None => meta.diagnosis.map(Diagnosis::code),
            Some(part) => meta.hpsqc.map(|h| f64::from(h.get(part))),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub feature: String,
    /// Present for the binary target only. Group A is the dysgraphic group.
    pub mann_whitney: Option<StatResult>,
    pub spearman: StatResult,
}

impl FeatureStats {
    /// The p value used for ranking.
    pub fn primary_p(&self) -> Option<f64> {
        match &self.mann_whitney {
            Some(mw) => mw.p,
            None => self.spearman.p,
        }
    }

    pub fn primary_p_fdr(&self) -> Option<f64> {
        match &self.mann_whitney {
            Some(mw) => mw.p_fdr,
            None => self.spearman.p_fdr,
        }
    }
}

/// Per-feature results sorted by ascending raw p (undefined last, ties in
/// catalog order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploratoryReport {
    pub target: Target,
    pub alpha: f64,
    pub n_rows: usize,
    pub results: Vec<FeatureStats>,
}

pub fn exploratory_analysis(matrix: &FeatureMatrix, target: Target, alpha: f64) -> Result<ExploratoryReport, StatsError> {
    let y: Vec<Option<f64>> = matrix.meta().iter().map(|m| target.value(m)).collect();
    let n_rows = y.iter().filter(|v| v.is_some()).count();
    if n_rows == 0 {
        return Err(StatsError::MissingTarget(target.name().to_string()));
    }

    let mut results: Vec<FeatureStats> = (0..matrix.n_cols())
        .into_par_iter()
        .map(|c| feature_stats(matrix, c, &y, target))
        .collect();

    adjust(&mut results, |r| r.mann_whitney.as_mut());
    adjust(&mut results, |r| Some(&mut r.spearman));

    results.sort_by(|a, b| match (a.primary_p(), b.primary_p()) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(ExploratoryReport { target, alpha, n_rows, results })
}

fn feature_stats(matrix: &FeatureMatrix, c: usize, y: &[Option<f64>], target: Target) -> FeatureStats {
    let feature = matrix.columns()[c].clone();
    let x = matrix.column(c);
    let (xs, ys) = complete_pairs(&x, y);
    let mut rho = spearman(&xs, &ys).unwrap_or_else(|e| StatResult::undefined(TestKind::Spearman, xs.len(), e.to_string()));
    rho.feature = feature.clone();

    let mann_whitney = target.is_binary().then(|| {
        let dd: Vec<f64> = xs.iter().zip(&ys).filter(|(_, &t)| t == 1.0).map(|(v, _)| *v).collect();
        let intact: Vec<f64> = xs.iter().zip(&ys).filter(|(_, &t)| t == 0.0).map(|(v, _)| *v).collect();
        let mut r = mann_whitney_u(&dd, &intact)
            .unwrap_or_else(|e| StatResult::undefined(TestKind::MannWhitney, xs.len(), e.to_string()));
        r.feature = feature.clone();
        r
    });
    FeatureStats { feature, mann_whitney, spearman: rho }
}

/// BH adjustment within one test family, over the defined p values.
fn adjust(results: &mut [FeatureStats], family: impl Fn(&mut FeatureStats) -> Option<&mut StatResult>) {
    let mut slots: Vec<&mut StatResult> = results.iter_mut().filter_map(family).filter(|r| r.p.is_some()).collect();
    let p: Vec<f64> = slots.iter().map(|r| r.p.expect("filtered")).collect();
    for (slot, q) in slots.iter_mut().zip(fdr_bh(&p)) {
        slot.p_fdr = Some(q);
    }
}

impl ExploratoryReport {
    pub fn top(&self, k: usize) -> &[FeatureStats] {
        &self.results[..k.min(self.results.len())]
    }

    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.results.iter().position(|r| r.feature == feature)
    }

    pub fn get(&self, feature: &str) -> Option<&FeatureStats> {
        self.results.iter().find(|r| r.feature == feature)
    }

    /// Features whose ranking p survives FDR adjustment at `alpha`.
    pub fn significant(&self) -> Vec<&FeatureStats> {
        self.results.iter().filter(|r| r.primary_p_fdr().is_some_and(|q| q < self.alpha)).collect()
    }

    /// Table layout: feature, Mann-Whitney p and adjusted p (binary target
    /// only), Spearman rho with its p and adjusted p.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: Option<&str>, top_k: Option<usize>) -> std::io::Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {}", c.replace('\n', " "))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "feature", "p", "p_fdr", "rho", "p_rho", "p_fdr_rho", "n", "significant"])?;
        let rows = top_k.map_or(&self.results[..], |k| self.top(k));
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (i, r) in rows.iter().enumerate() {
            let mw = r.mann_whitney.as_ref();
            let significant = r.primary_p_fdr().is_some_and(|q| q < self.alpha);
            w.write_record([
                (i + 1).to_string(),
                r.feature.clone(),
                fmt(mw.and_then(|m| m.p)),
                fmt(mw.and_then(|m| m.p_fdr)),
                fmt(r.spearman.rho),
                fmt(r.spearman.p),
                fmt(r.spearman.p_fdr),
                r.spearman.n_effective.to_string(),
                significant.to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self, comment: Option<&str>, top_k: Option<usize>) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, comment, top_k).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
