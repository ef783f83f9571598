use super::BoostError;
use serde::{Deserialize, Serialize};

/// Binary classification metrics as fractions in [0, 1] (MCC in [-1, 1]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub bacc: f64,
    pub mcc: f64,
    pub sen: f64,
    pub spe: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// MAE as a percentage of the score range.
    pub eer: f64,
}

pub fn balanced_accuracy(sen: f64, spe: f64) -> f64 {
    (sen + spe) / 2.0
}

/// Estimation error rate in percent.
pub fn estimation_error_rate(mae: f64, score_range: f64) -> f64 {
    100.0 * mae / score_range
}

impl ClassificationMetrics {
    /// A rate whose denominator is zero (no positives or no negatives) is 0.
    pub fn from_counts(tp: u64, fn_: u64, tn: u64, fp: u64) -> Self {
        let ratio = |a: u64, b: u64| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
        let sen = ratio(tp, fn_);
        let spe = ratio(tn, fp);
        let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
        let mcc = if factors.contains(&0) {
            0.0
        } else {
            let num = tp as f64 * tn as f64 - fp as f64 * fn_ as f64;
            num / factors.iter().map(|&f| f as f64).product::<f64>().sqrt()
        };
        ClassificationMetrics { bacc: balanced_accuracy(sen, spe), mcc, sen, spe }
    }
}

pub fn classification_metrics(y_true: &[bool], y_pred: &[bool]) -> Result<ClassificationMetrics, BoostError> {
    if y_true.is_empty() {
        return Err(BoostError::Data("no predictions to score".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(BoostError::Data(format!("{} labels but {} predictions", y_true.len(), y_pred.len())));
    }
    let (mut tp, mut fn_, mut tn, mut fp) = (0, 0, 0, 0);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
        }
    }
    Ok(ClassificationMetrics::from_counts(tp, fn_, tn, fp))
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64], score_range: f64) -> Result<RegressionMetrics, BoostError> {
    if !(score_range > 0.0) {
        return Err(BoostError::Data(format!("score range must be positive, got {score_range}")));
    }
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(BoostError::Data(format!("{} targets but {} predictions", y_true.len(), y_pred.len())));
    }
    let n = y_true.len() as f64;
    let mae = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / n;
    let mse = y_true.iter().zip(y_pred).map(|(t, p)| (t - p) * (t - p)).sum::<f64>() / n;
    Ok(RegressionMetrics { mae, mse, rmse: mse.sqrt(), eer: estimation_error_rate(mae, score_range) })
}
