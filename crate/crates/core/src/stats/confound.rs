use super::StatsError;
use crate::features::{FeatureMatrix, RowMeta};
use serde::{Deserialize, Serialize};

/// Categorical covariate that can be regressed out of the features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confound {
    Sex,
    ClassYear,
}

impl Confound {
    pub fn name(self) -> &'static str {
        match self {
            Confound::Sex => "sex",
            Confound::ClassYear => "class_year",
        }
    }

    fn level(self, meta: &RowMeta) -> Option<String> {
        match self {
            Confound::Sex => meta.sex.map(|s| format!("{s:?}").to_lowercase()),
            Confound::ClassYear => meta.class_year.map(|y| y.to_string()),
        }
    }

    /// Level of every row, in first-seen order of distinct levels.
    fn levels(self, matrix: &FeatureMatrix) -> Result<(Vec<String>, Vec<usize>), StatsError> {
        let mut names: Vec<String> = Vec::new();
        let mut codes = Vec::with_capacity(matrix.n_rows());
        for m in matrix.meta() {
            let level = self.level(m).ok_or_else(|| {
                StatsError::Confound(format!("{} missing for subject {}", self.name(), m.subject_id))
            })?;
            let code = match names.iter().position(|n| *n == level) {
                Some(c) => c,
                None => {
                    names.push(level);
                    names.len() - 1
                }
            };
            codes.push(code);
        }
        Ok((names, codes))
    }
}

/// A column that could not be adjusted and was passed through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfoundWarning {
    pub feature: String,
    pub message: String,
}

/// Per-level column means from an OLS fit on the level indicators. With an
/// intercept and one dummy per extra level the fitted values are exactly the
/// level means, so residuals are deviations from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfoundModel {
    pub confound: Confound,
    pub levels: Vec<String>,
    /// `means[column]` is `None` for pass-through columns.
    pub means: Vec<Option<Vec<f64>>>,
    pub warnings: Vec<ConfoundWarning>,
}

impl ConfoundModel {
    /// Fits on the given rows only.
    pub fn fit(matrix: &FeatureMatrix, confound: Confound, rows: &[usize]) -> Result<Self, StatsError> {
        let (levels, codes) = confound.levels(matrix)?;
        let mut counts = vec![0usize; levels.len()];
        for &r in rows {
            counts[codes[r]] += 1;
        }
        let present = counts.iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Err(StatsError::Confound(format!("{} has fewer than 2 levels", confound.name())));
        }
        if let Some(l) = counts.iter().position(|&c| c > 0 && c < 2) {
            return Err(StatsError::Confound(format!("level {} of {} has fewer than 2 rows", levels[l], confound.name())));
        }

        let mut means = Vec::with_capacity(matrix.n_cols());
        let mut warnings = Vec::new();
        for c in 0..matrix.n_cols() {
            let mut sum = vec![0.0; levels.len()];
            let mut n = vec![0usize; levels.len()];
            for &r in rows {
                if let Some(v) = matrix.get(r, c) {
                    sum[codes[r]] += v;
                    n[codes[r]] += 1;
                }
            }
            let thin = (0..levels.len()).find(|&l| counts[l] > 0 && n[l] < 2);
            if let Some(l) = thin {
                warnings.push(ConfoundWarning {
                    feature: matrix.columns()[c].clone(),
                    message: format!("level {} has {} non-missing values; column left unadjusted", levels[l], n[l]),
                });
                means.push(None);
                continue;
            }
            let total: f64 = sum.iter().sum();
            let grand = total / n.iter().sum::<usize>() as f64;
            means.push(Some(
                sum.iter().zip(&n).map(|(s, &k)| if k > 0 { s / k as f64 } else { grand }).collect(),
            ));
        }
        Ok(ConfoundModel { confound, levels, means, warnings })
    }

    /// Residualizes every row of `matrix`. Levels not seen during fitting
    /// use the mean over the fitted levels.
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix, StatsError> {
        let (levels, codes) = self.confound.levels(matrix)?;
        let map: Vec<Option<usize>> = levels.iter().map(|l| self.levels.iter().position(|k| k == l)).collect();
        let mut out = matrix.clone();
        for (c, means) in self.means.iter().enumerate() {
            let Some(means) = means else { continue };
            let fallback = means.iter().sum::<f64>() / means.len() as f64;
            let column: Vec<Option<f64>> = (0..matrix.n_rows())
                .map(|r| {
                    let center = map[codes[r]].map_or(fallback, |l| means[l]);
                    matrix.get(r, c).map(|v| v - center)
                })
                .collect();
            out.set_column(c, &column);
        }
        Ok(out)
    }
}

/// Replaces each feature by its residual after regressing on the confound,
/// fitting on all rows.
pub fn regress_out_confound(matrix: &FeatureMatrix, confound: Confound) -> Result<(FeatureMatrix, Vec<ConfoundWarning>), StatsError> {
    let rows: Vec<usize> = (0..matrix.n_rows()).collect();
    let model = ConfoundModel::fit(matrix, confound, &rows)?;
    let adjusted = model.apply(matrix)?;
    Ok((adjusted, model.warnings))
}
