//! Path-dependent TreeSHAP attributions for [`GbtModel`] on the margin scale.

use crate::boost::{BoostError, GbtModel, Tree};
use crate::features::FeatureMatrix;
use crate::stats::spearman_rho;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Attributions for one row: `base_value + sum(values) == model_output`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub values: Vec<f64>,
    /// Cover-weighted expected margin of the model.
    pub base_value: f64,
    /// Margin (pre-sigmoid) output for the row.
    pub model_output: f64,
}

#[derive(Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElement { feature, zero, one, weight: if l == 0 { 1.0 } else { 0.0 } });
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (l + 1) as f64;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / (l + 1) as f64;
    }
}

fn unwind(path: &mut Vec<PathElement>, i: usize) {
    let l = path.len() - 1;
    let (one, zero) = (path[i].one, path[i].zero);
    let mut next = path[l].weight;
    for j in (0..l).rev() {
        if one != 0.0 {
            let tmp = path[j].weight;
            path[j].weight = next * (l + 1) as f64 / ((j + 1) as f64 * one);
            next = tmp - path[j].weight * zero * (l - j) as f64 / (l + 1) as f64;
        } else {
            path[j].weight = path[j].weight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    for j in i..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    path.pop();
}

/// Total permutation weight of the path with element `i` removed.
fn unwound_sum(path: &[PathElement], i: usize) -> f64 {
    let l = path.len() - 1;
    let (one, zero) = (path[i].one, path[i].zero);
    let mut next = path[l].weight;
    let mut total = 0.0;
    for j in (0..l).rev() {
        if one != 0.0 {
            let tmp = next * (l + 1) as f64 / ((j + 1) as f64 * one);
            total += tmp;
            next = path[j].weight - tmp * zero * (l - j) as f64 / (l + 1) as f64;
        } else if zero != 0.0 {
            total += path[j].weight / zero * (l + 1) as f64 / (l - j) as f64;
        }
    }
    total
}

fn child_fraction(tree: &Tree, parent: usize, child: usize) -> f64 {
    let c = tree.nodes[parent].cover;
    if c > 0.0 {
        tree.nodes[child].cover / c
    } else {
        0.5
    }
}

#[allow(clippy::too_many_arguments)]
fn recurse(tree: &Tree, row: &[f64], phi: &mut [f64], node: usize, mut path: Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
    extend(&mut path, zero, one, feature);
    let n = &tree.nodes[node];
    let Some(split) = &n.split else {
        for i in 1..path.len() {
            let w = unwound_sum(&path, i);
            let e = path[i];
            phi[e.feature.expect("only the root element lacks a feature")] += w * (e.one - e.zero) * n.value;
        }
        return;
    };
    let hot = split.child(row[split.feature]);
    let cold = if hot == split.left { split.right } else { split.left };
    let (mut iz, mut io) = (1.0, 1.0);
    if let Some(k) = path.iter().position(|e| e.feature == Some(split.feature)) {
        iz = path[k].zero;
        io = path[k].one;
        unwind(&mut path, k);
    }
    recurse(tree, row, phi, hot, path.clone(), iz * child_fraction(tree, node, hot), io, Some(split.feature));
    recurse(tree, row, phi, cold, path, iz * child_fraction(tree, node, cold), 0.0, Some(split.feature));
}

/// Cover-weighted mean leaf value of one tree.
pub fn expected_value(tree: &Tree) -> f64 {
    fn walk(t: &Tree, i: usize) -> f64 {
        match &t.nodes[i].split {
            None => t.nodes[i].value,
            Some(s) => child_fraction(t, i, s.left) * walk(t, s.left) + child_fraction(t, i, s.right) * walk(t, s.right),
        }
    }
    walk(tree, 0)
}

/// Adds one tree's attributions for `row` (dense, NaN = missing) into `phi`.
pub fn tree_shap_single(tree: &Tree, row: &[f64], phi: &mut [f64]) {
    if tree.nodes[0].split.is_some() {
        recurse(tree, row, phi, 0, Vec::with_capacity(16), 1.0, 1.0, None);
    }
}

pub fn base_value(model: &GbtModel) -> f64 {
    model.base_score + model.trees.iter().map(expected_value).sum::<f64>()
}

/// Explains one dense row in model feature order.
pub fn tree_shap(model: &GbtModel, row: &[f64]) -> ShapExplanation {
    let mut phi = vec![0.0; model.feature_names.len()];
    for t in &model.trees {
        tree_shap_single(t, row, &mut phi);
    }
    ShapExplanation { values: phi, base_value: base_value(model), model_output: model.margin_dense(row) }
}

/// Attributions for every row of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapTable {
    pub feature_names: Vec<String>,
    pub subject_ids: Vec<String>,
    pub base_value: f64,
    pub model_outputs: Vec<f64>,
    /// `values[row][feature]`.
    pub values: Vec<Vec<f64>>,
    /// Feature values as seen by the model; `None` when missing.
    pub feature_values: Vec<Vec<Option<f64>>>,
}

pub fn explain_matrix(model: &GbtModel, matrix: &FeatureMatrix) -> Result<ShapTable, BoostError> {
    let cols = model.align(matrix.columns())?;
    let rows: Vec<Vec<f64>> = (0..matrix.n_rows())
        .map(|r| cols.iter().map(|&c| matrix.get(r, c).filter(|v| v.is_finite()).unwrap_or(f64::NAN)).collect())
        .collect();
    let explained: Vec<ShapExplanation> = rows.par_iter().map(|row| tree_shap(model, row)).collect();
    Ok(ShapTable {
        feature_names: model.feature_names.clone(),
        subject_ids: matrix.meta().iter().map(|m| m.subject_id.clone()).collect(),
        base_value: base_value(model),
        model_outputs: explained.iter().map(|e| e.model_output).collect(),
        values: explained.into_iter().map(|e| e.values).collect(),
        feature_values: rows.iter().map(|r| r.iter().map(|v| Some(*v).filter(|v| !v.is_nan())).collect()).collect(),
    })
}

impl ShapTable {
    /// Wide layout: one row per subject, one column per feature.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {}", c.replace('\n', " "))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["subject_id", "base_value", "model_output"].into_iter().map(String::from).chain(self.feature_names.iter().cloned()))?;
        for (i, id) in self.subject_ids.iter().enumerate() {
            let mut rec = vec![id.clone(), self.base_value.to_string(), self.model_outputs[i].to_string()];
            rec.extend(self.values[i].iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()
    }

    /// Long layout (subject, feature, value, attribution) for beeswarm plots.
    pub fn write_long_csv<W: Write>(&self, mut out: W, comment: Option<&str>, features: &[String]) -> std::io::Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {}", c.replace('\n', " "))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["subject_id", "feature", "value", "shap"])?;
        for f in features {
            let Some(c) = self.feature_names.iter().position(|n| n == f) else { continue };
            for (i, id) in self.subject_ids.iter().enumerate() {
                let v = self.feature_values[i][c].map(|v| v.to_string()).unwrap_or_default();
                w.write_record([id.as_str(), f.as_str(), v.as_str(), self.values[i][c].to_string().as_str()])?;
            }
        }
        w.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub rank: usize,
    pub feature: String,
    pub mean_abs_shap: f64,
    /// Spearman correlation between feature value and attribution; `None`
    /// when undefined (constant values or attributions, too few rows).
    pub value_correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// Attributions are on the margin (log-odds for classifiers) scale.
    pub scale: String,
    pub base_value: f64,
    pub n_rows: usize,
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    pub fn top(&self, k: usize) -> &[FeatureImportance] {
        &self.features[..k.min(self.features.len())]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Features ranked by mean |SHAP| (ties in model feature order).
pub fn importance_from_table(table: &ShapTable) -> ImportanceReport {
    let n = table.values.len();
    let mut features: Vec<FeatureImportance> = table
        .feature_names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let mean_abs = if n == 0 { 0.0 } else { table.values.iter().map(|r| r[c].abs()).sum::<f64>() / n as f64 };
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                (0..n).filter_map(|r| table.feature_values[r][c].map(|v| (v, table.values[r][c]))).unzip();
            let value_correlation = if xs.len() >= 3 { spearman_rho(&xs, &ys) } else { None };
            FeatureImportance { rank: 0, feature: name.clone(), mean_abs_shap: mean_abs, value_correlation }
        })
        .collect();
    features.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap));
    for (i, f) in features.iter_mut().enumerate() {
        f.rank = i + 1;
    }
    ImportanceReport { scale: "margin".into(), base_value: table.base_value, n_rows: n, features }
}

pub fn global_importance(model: &GbtModel, matrix: &FeatureMatrix) -> Result<ImportanceReport, BoostError> {
    Ok(importance_from_table(&explain_matrix(model, matrix)?))
}
