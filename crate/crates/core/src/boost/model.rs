use super::config::{mix_seed, GbtConfig, Objective};
use super::dataset::Dataset;
use super::metrics::{classification_metrics, regression_metrics};
use super::tree::{grow_tree, sample_features, Tree, TreeParams};
use super::BoostError;
use crate::features::FeatureMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Additive tree ensemble. Outputs are `base_score + sum of tree outputs`
/// on the margin scale, passed through the sigmoid for [`Objective::Logistic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub config: GbtConfig,
    /// Initial margin: target mean, or log-odds of the positive rate.
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

pub fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// Checks the target against the objective before any work is done.
pub fn check_target(y: &[f64], objective: Objective) -> Result<(), BoostError> {
    if y.len() < 2 {
        return Err(BoostError::Data(format!("need at least 2 rows, got {}", y.len())));
    }
    match objective {
        Objective::Logistic => {
            if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(BoostError::Data(format!("logistic objective needs 0/1 labels, got {v}")));
            }
            if y.iter().all(|&v| v == y[0]) {
                return Err(BoostError::DegenerateTarget("only one class present".into()));
            }
        }
        Objective::SquaredError => {
            if y.iter().all(|&v| v == y[0]) {
                return Err(BoostError::DegenerateTarget("target has zero variance".into()));
            }
        }
    }
    Ok(())
}

fn base_margin(y: &[f64], objective: Objective) -> f64 {
    match objective {
        Objective::SquaredError => y.iter().sum::<f64>() / y.len() as f64,
        Objective::Logistic => {
            let pos = y.iter().filter(|&&v| v == 1.0).count() as f64;
            let neg = y.len() as f64 - pos;
            // difference of logs keeps label swapping exactly antisymmetric
            pos.ln() - neg.ln()
        }
    }
}

fn gradients(y: &[f64], margin: &[f64], cfg: &GbtConfig, grad: &mut [f64], hess: &mut [f64]) {
    for i in 0..y.len() {
        let (g, h) = match cfg.objective {
            Objective::SquaredError => (margin[i] - y[i], 1.0),
            Objective::Logistic => {
                let p = sigmoid(margin[i]);
                let w = if y[i] == 1.0 { cfg.scale_pos_weight } else { 1.0 };
                ((p - y[i]) * w, (p * (1.0 - p)).max(1e-16) * w)
            }
        };
        grad[i] = g;
        hess[i] = h;
    }
}

/// Validation score where higher is better: MCC or negated MAE.
fn validation_score(objective: Objective, y: &[f64], margin: &[f64]) -> f64 {
    match objective {
        Objective::Logistic => {
            let t: Vec<bool> = y.iter().map(|&v| v == 1.0).collect();
            let p: Vec<bool> = margin.iter().map(|&m| sigmoid(m) >= 0.5).collect();
            classification_metrics(&t, &p).map_or(f64::NEG_INFINITY, |m| m.mcc)
        }
        Objective::SquaredError => regression_metrics(y, margin, 1.0).map_or(f64::NEG_INFINITY, |m| -m.mae),
    }
}

/// Trains an ensemble on all rows of `data`.
pub fn train(data: &Dataset, cfg: &GbtConfig) -> Result<GbtModel, BoostError> {
    cfg.check().map_err(BoostError::Config)?;
    check_target(data.y(), cfg.objective)?;
    let Some(patience) = cfg.early_stopping_rounds else {
        return Ok(boost(data, cfg, None));
    };

    let (fit_rows, valid_rows) = validation_split(data.y(), cfg);
    let fit = data.subset(&fit_rows);
    let valid = data.subset(&valid_rows);
    check_target(fit.y(), cfg.objective)?;
    Ok(boost(&fit, cfg, Some((&valid, patience))))
}

/// Holds out `validation_fraction` of each class (or of all rows for regression).
fn validation_split(y: &[f64], cfg: &GbtConfig) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x5EED_0E5));
    let groups: Vec<Vec<usize>> = match cfg.objective {
        Objective::Logistic => [0.0, 1.0].iter().map(|&c| (0..y.len()).filter(|&i| y[i] == c).collect()).collect(),
        Objective::SquaredError => vec![(0..y.len()).collect()],
    };
    let (mut fit, mut valid) = (Vec::new(), Vec::new());
    for mut g in groups {
        g.shuffle(&mut rng);
        let hi = g.len() - 1;
        let k = ((g.len() as f64 * cfg.validation_fraction).round() as usize).clamp(hi.min(1), hi);
        valid.extend_from_slice(&g[..k]);
        fit.extend_from_slice(&g[k..]);
    }
    fit.sort_unstable();
    valid.sort_unstable();
    (fit, valid)
}

fn boost(data: &Dataset, cfg: &GbtConfig, monitor: Option<(&Dataset, usize)>) -> GbtModel {
    let n = data.n_rows();
    let y = data.y();
    let base = base_margin(y, cfg.objective);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut margin = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut in_sample = vec![true; n];
    let all_features: Vec<usize> = (0..data.n_cols()).collect();
    let params = TreeParams {
        lambda: cfg.reg_lambda,
        gamma: cfg.gamma,
        min_child_weight: cfg.min_child_weight,
        max_depth: cfg.max_depth,
        learning_rate: cfg.learning_rate,
        colsample_bylevel: cfg.colsample_bylevel,
    };

    let mut valid_margin = monitor.map(|(v, _)| vec![base; v.n_rows()]);
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    for round in 0..cfg.n_rounds {
        gradients(y, &margin, cfg, &mut grad, &mut hess);
        if cfg.subsample < 1.0 {
            for s in in_sample.iter_mut() {
                *s = rng.random::<f64>() < cfg.subsample;
            }
        }
        let features = sample_features(&all_features, cfg.colsample_bytree, &mut rng);
        let tree = grow_tree(data, &grad, &hess, &in_sample, &features, &params, &mut rng);
        for (r, m) in margin.iter_mut().enumerate() {
            *m += tree.nodes[tree.leaf_index(|f| data.value(f, r))].value;
        }
        if let (Some((valid, patience)), Some(vm)) = (monitor, valid_margin.as_mut()) {
            for (r, m) in vm.iter_mut().enumerate() {
                *m += tree.nodes[tree.leaf_index(|f| valid.value(f, r))].value;
            }
            let score = validation_score(cfg.objective, valid.y(), vm);
            if score > best.0 {
                best = (score, round + 1);
            }
            trees.push(tree);
            if round + 1 - best.1 >= patience {
                break;
            }
        } else {
            trees.push(tree);
        }
    }
    if monitor.is_some() {
        trees.truncate(best.1);
    }
    GbtModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_names: data.feature_names().to_vec(),
        config: cfg.clone(),
        base_score: base,
        trees,
    }
}

impl GbtModel {
    /// Margin for a dense row in model feature order (NaN = missing).
    pub fn margin_dense(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn output_from_margin(&self, margin: f64) -> f64 {
        match self.config.objective {
            Objective::Logistic => sigmoid(margin),
            Objective::SquaredError => margin,
        }
    }

    /// Probability (logistic) or score for a dense row.
    pub fn predict_dense(&self, row: &[f64]) -> f64 {
        self.output_from_margin(self.margin_dense(row))
    }

    /// Prediction for a row in model feature order.
    pub fn predict(&self, row: &[Option<f64>]) -> Result<f64, BoostError> {
        if row.len() != self.feature_names.len() {
            return Err(BoostError::Data(format!("row has {} values, model expects {}", row.len(), self.feature_names.len())));
        }
        Ok(self.predict_dense(&dense(row)))
    }

    /// Prediction for a row whose values are labelled by `names`.
    pub fn predict_named(&self, names: &[String], row: &[Option<f64>]) -> Result<f64, BoostError> {
        let aligned = self.align(names)?;
        let dense: Vec<f64> = aligned.iter().map(|&c| row[c].filter(|v| v.is_finite()).unwrap_or(f64::NAN)).collect();
        Ok(self.predict_dense(&dense))
    }

    /// Column in `names` for each model feature.
    pub fn align(&self, names: &[String]) -> Result<Vec<usize>, BoostError> {
        if let Some(extra) = names.iter().find(|n| !self.feature_names.contains(n)) {
            return Err(BoostError::UnknownFeature(extra.clone()));
        }
        self.feature_names
            .iter()
            .map(|f| names.iter().position(|n| n == f).ok_or_else(|| BoostError::MissingFeature(f.clone())))
            .collect()
    }

    pub fn predict_matrix(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>, BoostError> {
        let cols = self.align(matrix.columns())?;
        Ok((0..matrix.n_rows())
            .map(|r| {
                let row: Vec<f64> = cols.iter().map(|&c| matrix.get(r, c).filter(|v| v.is_finite()).unwrap_or(f64::NAN)).collect();
                self.predict_dense(&row)
            })
            .collect())
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n_rows()).map(|r| self.predict_dense(&data.dense_row(r))).collect()
    }

    pub fn margins_dataset(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n_rows()).map(|r| self.margin_dense(&data.dense_row(r))).collect()
    }

    /// Mean training loss: half squared error or log-loss.
    pub fn loss(&self, data: &Dataset) -> f64 {
        let m = self.margins_dataset(data);
        let total: f64 = m
            .iter()
            .zip(data.y())
            .map(|(&m, &y)| match self.config.objective {
                Objective::SquaredError => 0.5 * (m - y) * (m - y),
                Objective::Logistic => {
                    // log(1 + e^m) - y m, computed stably
                    m.max(0.0) + (-m.abs()).exp().ln_1p() - y * m
                }
            })
            .sum();
        total / data.n_rows() as f64
    }

    /// The ensemble truncated to its first `k` trees.
    pub fn with_rounds(&self, k: usize) -> GbtModel {
        GbtModel { trees: self.trees[..k.min(self.trees.len())].to_vec(), ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(raw: &str) -> Result<Self, BoostError> {
        let m: GbtModel = serde_json::from_str(raw).map_err(|e| BoostError::Format(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(BoostError::Format(format!("unsupported model format version {}", m.format_version)));
        }
        for (t, tree) in m.trees.iter().enumerate() {
            for (i, node) in tree.nodes.iter().enumerate() {
                if let Some(s) = &node.split {
                    // children always follow their parent, which rules out cycles
                    let bad_child = |c: usize| c <= i || c >= tree.nodes.len();
                    if s.feature >= m.feature_names.len() || bad_child(s.left) || bad_child(s.right) {
                        return Err(BoostError::Format(format!("tree {t} references a missing node or feature")));
                    }
                }
            }
        }
        Ok(m)
    }
}

fn dense(row: &[Option<f64>]) -> Vec<f64> {
    row.iter().map(|v| v.filter(|v| v.is_finite()).unwrap_or(f64::NAN)).collect()
}
