use super::config::{mix_seed, GbtConfig, Grid, Objective};
use super::cv::{label_strata, quartile_strata, stratified_repeated_kfold, Folds};
use super::dataset::Dataset;
use super::metrics::{classification_metrics, regression_metrics, ClassificationMetrics, RegressionMetrics};
use super::model::{check_target, train};
use super::BoostError;
use crate::features::FeatureMatrix;
use crate::stats::{Confound, ConfoundModel, Target};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub fn objective_for(target: Target) -> Objective {
    if target.is_binary() {
        Objective::Logistic
    } else {
        Objective::SquaredError
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvOptions {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Fit the confound regression on each training fold instead of
    /// expecting an already adjusted matrix.
    pub confound_within_folds: Option<Confound>,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { k: 10, repeats: 10, seed: 0, confound_within_folds: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation over folds (0 for a single fold).
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub bacc: MeanStd,
    pub mcc: MeanStd,
    pub sen: MeanStd,
    pub spe: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub mae: MeanStd,
    pub mse: MeanStd,
    pub rmse: MeanStd,
    pub eer: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regression: Option<RegressionMetrics>,
}

/// Cross-validated performance of one configuration. Metrics are computed
/// per test fold and summarized over all folds of all repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub target: Target,
    pub config: GbtConfig,
    pub n_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regression: Option<RegressionSummary>,
    pub folds: Vec<FoldResult>,
    pub fold_assignments: Folds,
}

impl EvalReport {
    /// Higher is better: mean MCC, or negated mean MAE.
    pub fn selection_score(&self) -> f64 {
        match (&self.classification, &self.regression) {
            (Some(c), _) => c.mcc.mean,
            (None, Some(r)) => -r.mae.mean,
            (None, None) => f64::NEG_INFINITY,
        }
    }

    /// (metric, mean, std) rows; fractions for classification, score units
    /// and percent (EER) for regression.
    pub fn summary_rows(&self) -> Vec<(&'static str, MeanStd)> {
        let mut rows = Vec::new();
        if let Some(c) = &self.classification {
            rows.extend([("bacc", c.bacc), ("mcc", c.mcc), ("sen", c.sen), ("spe", c.spe)]);
        }
        if let Some(r) = &self.regression {
            rows.extend([("mae", r.mae), ("mse", r.mse), ("rmse", r.rmse), ("eer", r.eer)]);
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {}", c.replace('\n', " "))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["target", "metric", "mean", "std"])?;
        for (name, ms) in self.summary_rows() {
            w.write_record([self.target.name(), name, &ms.mean.to_string(), &ms.std.to_string()])?;
        }
        w.flush()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fold splits and per-fold datasets, shared by every configuration evaluated on them.
pub struct CvPlan {
    target: Target,
    objective: Objective,
    n_rows: usize,
    folds: Folds,
    fold_data: Vec<(Dataset, Dataset)>,
}

impl CvPlan {
    pub fn new(matrix: &FeatureMatrix, target: Target, opts: &CvOptions) -> Result<Self, BoostError> {
        let objective = objective_for(target);
        let full = Dataset::from_matrix(matrix, target)?;
        check_target(full.y(), objective)?;
        let strata = match objective {
            Objective::Logistic => label_strata(full.y()),
            Objective::SquaredError => quartile_strata(full.y()),
        };
        let folds = stratified_repeated_kfold(&strata, opts.k, opts.repeats, opts.seed)?;
        let fold_data = folds
            .pairs()
            .map(|(rep, f)| {
                let (train_rows, test_rows) = folds.split(rep, f);
                match opts.confound_within_folds {
                    None => Ok((full.subset(&train_rows), full.subset(&test_rows))),
                    Some(confound) => {
                        let source = |rows: &[usize]| rows.iter().map(|&r| full.source_rows()[r]).collect::<Vec<_>>();
                        let model = ConfoundModel::fit(matrix, confound, &source(&train_rows))?;
                        let adjusted = Dataset::from_matrix(&model.apply(matrix)?, target)?;
                        Ok((adjusted.subset(&train_rows), adjusted.subset(&test_rows)))
                    }
                }
            })
            .collect::<Result<Vec<_>, BoostError>>()?;
        Ok(CvPlan { target, objective, n_rows: full.n_rows(), folds, fold_data })
    }

    pub fn folds(&self) -> &Folds {
        &self.folds
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    /// Trains and scores `cfg` on every fold. Fold `i` trains with seed
    /// `mix_seed(cfg.seed, i)`.
    pub fn evaluate(&self, cfg: &GbtConfig) -> Result<EvalReport, BoostError> {
        let cfg = GbtConfig { objective: self.objective, ..cfg.clone() };
        let mut results = Vec::with_capacity(self.fold_data.len());
        for (i, ((rep, fold), (train_set, test_set))) in self.folds.pairs().zip(&self.fold_data).enumerate() {
            let fold_cfg = GbtConfig { seed: mix_seed(cfg.seed, i as u64), ..cfg.clone() };
            let model = train(train_set, &fold_cfg)?;
            let pred = model.predict_dataset(test_set);
            let mut r = FoldResult {
                repeat: rep,
                fold,
                n_train: train_set.n_rows(),
                n_test: test_set.n_rows(),
                classification: None,
                regression: None,
            };
            match self.target.score_part() {
                None => {
                    let truth: Vec<bool> = test_set.y().iter().map(|&v| v == 1.0).collect();
                    let called: Vec<bool> = pred.iter().map(|&p| p >= 0.5).collect();
                    r.classification = Some(classification_metrics(&truth, &called)?);
                }
                Some(part) => r.regression = Some(regression_metrics(test_set.y(), &pred, part.range())?),
            }
            results.push(r);
        }
        let pick = |f: &dyn Fn(&FoldResult) -> Option<f64>| MeanStd::of(&results.iter().filter_map(f).collect::<Vec<_>>());
        let classification = self.target.is_binary().then(|| ClassificationSummary {
            bacc: pick(&|r| r.classification.map(|c| c.bacc)),
            mcc: pick(&|r| r.classification.map(|c| c.mcc)),
            sen: pick(&|r| r.classification.map(|c| c.sen)),
            spe: pick(&|r| r.classification.map(|c| c.spe)),
        });
        let regression = (!self.target.is_binary()).then(|| RegressionSummary {
            mae: pick(&|r| r.regression.map(|m| m.mae)),
            mse: pick(&|r| r.regression.map(|m| m.mse)),
            rmse: pick(&|r| r.regression.map(|m| m.rmse)),
            eer: pick(&|r| r.regression.map(|m| m.eer)),
        });
        Ok(EvalReport {
            target: self.target,
            config: cfg,
            n_rows: self.n_rows,
            classification,
            regression,
            folds: results,
            fold_assignments: self.folds.clone(),
        })
    }
}

/// Cross-validates one configuration.
pub fn cross_validate(matrix: &FeatureMatrix, target: Target, cfg: &GbtConfig, opts: &CvOptions) -> Result<EvalReport, BoostError> {
    CvPlan::new(matrix, target, opts)?.evaluate(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub n_iter: usize,
    pub seed: u64,
    pub cv: CvOptions,
    pub grid: Grid,
    /// Source of the fields outside the grid (rounds, lambda, early stopping).
    pub base: GbtConfig,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { n_iter: 500, seed: 0, cv: CvOptions::default(), grid: Grid::default(), base: GbtConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub config: GbtConfig,
    /// Selection score (higher is better); `None` when the config failed.
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_index: usize,
    pub best: GbtConfig,
    pub report: EvalReport,
    pub trials: Vec<Trial>,
}

/// The `n_iter` configurations a search with these options evaluates.
pub fn sample_configs(opts: &SearchOptions, objective: Objective) -> Vec<GbtConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(1);
    (0..opts.n_iter)
        .map(|i| GbtConfig { objective, seed: mix_seed(opts.seed, i as u64), ..opts.grid.sample(&opts.base, &mut rng) })
        .collect()
}

/// Randomized search over the grid with repeated stratified CV, selecting
/// by mean MCC (classification) or mean MAE (regression). Ties keep the
/// earliest configuration.
pub fn random_search(matrix: &FeatureMatrix, target: Target, opts: &SearchOptions) -> Result<SearchResult, BoostError> {
    if opts.n_iter == 0 {
        return Err(BoostError::Config("n_iter must be at least 1".into()));
    }
    opts.grid.check().map_err(BoostError::Config)?;
    let plan = CvPlan::new(matrix, target, &opts.cv)?;
    let configs = sample_configs(opts, plan.objective());

    let outcomes: Vec<Result<EvalReport, BoostError>> = configs.par_iter().map(|cfg| plan.evaluate(cfg)).collect();

    let mut trials = Vec::with_capacity(configs.len());
    let mut best: Option<(usize, EvalReport)> = None;
    for (index, (config, outcome)) in configs.into_iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(report) => {
                let score = report.selection_score();
                trials.push(Trial { index, config, score: Some(score), error: None });
                if best.as_ref().is_none_or(|(_, b)| score > b.selection_score()) {
                    best = Some((index, report));
                }
            }
            Err(e) => {
                log::warn!("search config {index} skipped: {e}");
                trials.push(Trial { index, config, score: None, error: Some(e.to_string()) });
            }
        }
    }
    let (best_index, report) = best.ok_or_else(|| BoostError::Config("every search configuration failed".into()))?;
    Ok(SearchResult { best_index, best: report.config.clone(), report, trials })
}
