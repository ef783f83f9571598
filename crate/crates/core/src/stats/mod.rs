//! Exploratory statistics: confound removal, Mann-Whitney U, Spearman
//! correlation and Benjamini-Hochberg adjustment.

mod confound;
mod exploratory;
mod fdr;
mod mann_whitney;
mod spearman;

pub use confound::{regress_out_confound, Confound, ConfoundModel, ConfoundWarning};
pub use exploratory::{exploratory_analysis, ExploratoryReport, FeatureStats, Target};
pub use fdr::fdr_bh;
pub use mann_whitney::{mann_whitney_u, mann_whitney_u_with, u_distribution, MwMethod, EXACT_MAX_GROUP};
pub use spearman::{spearman, spearman_rho, SPEARMAN_EXACT_MAX};

use serde::{Deserialize, Serialize};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    MannWhitney,
    Spearman,
}

/// Outcome of one test on one feature. `None` fields are undefined results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub feature: String,
    pub test: TestKind,
    pub statistic: Option<f64>,
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub p_fdr: Option<f64>,
    pub n_effective: usize,
    /// Sign of the association: +1, -1 or 0.
    pub direction: i8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl StatResult {
    pub(crate) fn undefined(test: TestKind, n_effective: usize, note: impl Into<String>) -> Self {
        StatResult {
            feature: String::new(),
            test,
            statistic: None,
            rho: None,
            p: None,
            p_fdr: None,
            n_effective,
            direction: 0,
            note: Some(note.into()),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("a comparison group has no values")]
    EmptyGroup,
    #[error("exact Mann-Whitney p is only available without ties")]
    ExactWithTies,
    #[error("need at least 3 complete pairs, got {0}")]
    TooFewPairs(usize),
    #[error("x and y differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("confound: {0}")]
    Confound(String),
    #[error("target {0} is missing for every row")]
    MissingTarget(String),
}

/// Average-tie ranks (1-based) and the sizes of all tie groups.
pub(crate) fn ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut r = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            r[k] = avg;
        }
        ties.push(j - i);
        i = j;
    }
    (r, ties)
}

/// Pairs where both entries are present.
pub fn complete_pairs(x: &[Option<f64>], y: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    x.iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        let (r, t) = ranks(&[10.0, 20.0, 10.0, 30.0, 20.0, 20.0]);
        assert_eq!(r, vec![1.5, 4.0, 1.5, 6.0, 4.0, 4.0]);
        assert_eq!(t, vec![2, 3, 1]);
    }

    #[test]
    fn complete_pairs_drops_missing() {
        let (a, b) = complete_pairs(&[Some(1.0), None, Some(3.0)], &[Some(2.0), Some(5.0), None]);
        assert_eq!((a, b), (vec![1.0], vec![2.0]));
    }
}
