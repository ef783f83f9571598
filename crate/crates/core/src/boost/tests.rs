use super::*;
use crate::features::{FeatureMatrix, RowMeta};
use crate::signal::{Diagnosis, HpsqcScore};
use crate::stats::Target;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(rows: Vec<Vec<Option<f64>>>, y: Vec<f64>) -> Dataset {
    let names = (0..rows[0].len()).map(|c| format!("f{c}")).collect();
    Dataset::new(names, &rows, y).unwrap()
}

/// Random rows with a few missing cells; label depends on features 0 and 2.
fn random_classification(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let row: Vec<Option<f64>> =
            (0..p).map(|_| if rng.random::<f64>() < 0.05 { None } else { Some(rng.random::<f64>() * 10.0) }).collect();
        let score = row[0].unwrap_or(5.0) - row[2].unwrap_or(5.0) + rng.random::<f64>() * 3.0;
        y.push(if score > 1.5 { 1.0 } else { 0.0 });
        rows.push(row);
    }
    dataset(rows, y)
}

fn cfg(objective: Objective) -> GbtConfig {
    GbtConfig { objective, ..GbtConfig::default() }
}

#[test]
fn zero_rounds_predicts_base_score() {
    let d = dataset(vec![vec![Some(1.0)], vec![Some(2.0)], vec![Some(3.0)]], vec![1.0, 2.0, 6.0]);
    let m = train(&d, &GbtConfig { n_rounds: 0, ..cfg(Objective::SquaredError) }).unwrap();
    assert!(m.trees.is_empty());
    assert_eq!(m.base_score, 3.0);
    assert_eq!(m.predict(&[Some(100.0)]).unwrap(), 3.0);
    assert_eq!(m.predict(&[None]).unwrap(), 3.0);
}

#[test]
fn balanced_logistic_without_splits_predicts_one_half() {
    let d = dataset((0..10).map(|i| vec![Some(f64::from(i))]).collect(), (0..10).map(|i| f64::from(i % 2)).collect());
    let m = train(&d, &GbtConfig { gamma: 1e9, n_rounds: 5, ..cfg(Objective::Logistic) }).unwrap();
    for t in &m.trees {
        assert_eq!(t.nodes.len(), 1);
    }
    for i in 0..10 {
        assert_eq!(m.predict(&[Some(f64::from(i))]).unwrap(), 0.5);
    }
}

#[test]
fn interpolates_twenty_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<Option<f64>>> = (0..20).map(|_| (0..3).map(|_| Some(rng.random::<f64>())).collect()).collect();
    let y: Vec<f64> = (0..20).map(|_| rng.random::<f64>() * 10.0).collect();
    let d = dataset(rows, y.clone());
    let c = GbtConfig { max_depth: 6, learning_rate: 0.3, n_rounds: 200, ..cfg(Objective::SquaredError) };
    let m = train(&d, &c).unwrap();
    let pred = m.predict_dataset(&d);
    let mae = regression_metrics(&y, &pred, 1.0).unwrap().mae;
    assert!(mae < 1e-3, "training MAE {mae}");
}

#[test]
fn training_loss_never_increases_without_sampling() {
    let d = random_classification(80, 5, 11);
    for objective in [Objective::Logistic, Objective::SquaredError] {
        for lr in [0.01, 0.3] {
            let m = train(&d, &GbtConfig { learning_rate: lr, n_rounds: 40, ..cfg(objective) }).unwrap();
            let losses: Vec<f64> = (0..=m.trees.len()).map(|k| m.with_rounds(k).loss(&d)).collect();
            for w in losses.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{objective:?} lr {lr}: {} -> {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn depth_zero_leaf_is_scaled_mean_residual() {
    let d = dataset((0..4).map(|i| vec![Some(f64::from(i))]).collect(), vec![1.0, 2.0, 4.0, 9.0]);
    let current = [0.5, 0.0, 3.0, 1.0];
    let grad: Vec<f64> = current.iter().zip(d.y()).map(|(p, y)| p - y).collect();
    let params = super::tree::TreeParams {
        lambda: 0.0,
        gamma: 0.0,
        min_child_weight: 1.0,
        max_depth: 0,
        learning_rate: 0.1,
        colsample_bylevel: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tree = super::tree::grow_tree(&d, &grad, &[1.0; 4], &[true; 4], &[0], &params, &mut rng);
    let mean_residual = (0.5 + 2.0 + 1.0 + 8.0) / 4.0;
    assert_eq!(tree.nodes.len(), 1);
    assert_eq!(tree.nodes[0].value, 0.1 * mean_residual);
    // with the target mean as base score the first leaf of a stump-free model is zero
    let m = train(&d, &GbtConfig { max_depth: 0, n_rounds: 1, ..cfg(Objective::SquaredError) }).unwrap();
    assert_eq!(m.base_score, 4.0);
    assert_eq!(m.trees[0].nodes[0].value, 0.0);
}

#[test]
fn hand_built_tree_routing_and_missing_values() {
    let tree = Tree {
        nodes: vec![
            Node {
                cover: 2.0,
                value: 0.0,
                split: Some(Split { feature: 0, threshold: 5.0, default_left: false, left: 1, right: 2, gain: 1.0 }),
            },
            Node { cover: 1.0, value: -1.0, split: None },
            Node { cover: 1.0, value: 1.0, split: None },
        ],
    };
    let m = GbtModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_names: vec!["x".into()],
        config: cfg(Objective::SquaredError),
        base_score: 0.0,
        trees: vec![tree],
    };
    assert_eq!(m.predict(&[Some(3.0)]).unwrap(), -1.0);
    assert_eq!(m.predict(&[Some(5.0)]).unwrap(), 1.0);
    assert_eq!(m.predict(&[None]).unwrap(), 1.0);
    assert!(matches!(m.predict_named(&["y".into()], &[Some(1.0)]), Err(BoostError::UnknownFeature(_))));
    assert!(matches!(m.predict_named(&[], &[]), Err(BoostError::MissingFeature(_))));
    let back = GbtModel::from_json(&m.to_json()).unwrap();
    assert_eq!(back, m);
    let cyclic = m.to_json().replace("\"left\": 1", "\"left\": 0");
    assert!(GbtModel::from_json(&cyclic).is_err());
}

#[test]
fn prediction_is_sum_of_independent_trees() {
    let d = random_classification(60, 4, 5);
    let m = train(&d, &GbtConfig { n_rounds: 15, subsample: 0.8, colsample_bytree: 0.5, ..cfg(Objective::Logistic) }).unwrap();
    for r in 0..d.n_rows() {
        let row = d.dense_row(r);
        let mut margin = m.base_score;
        for t in &m.trees {
            margin += t.predict(&row);
        }
        assert!((m.margin_dense(&row) - margin).abs() < 1e-12);
        assert!((m.predict_dense(&row) - sigmoid(margin)).abs() < 1e-12);
    }
}

#[test]
fn structure_invariants_hold() {
    let d = random_classification(120, 6, 8);
    for depth in [1, 3, 6] {
        let c = GbtConfig { max_depth: depth, min_child_weight: 0.5, n_rounds: 20, subsample: 0.7, colsample_bylevel: 0.5, ..cfg(Objective::Logistic) };
        let m = train(&d, &c).unwrap();
        for t in &m.trees {
            assert!(t.depth() <= depth);
            for node in &t.nodes {
                if let Some(s) = &node.split {
                    let children = t.nodes[s.left].cover + t.nodes[s.right].cover;
                    assert!(node.cover >= children - 1e-12 * node.cover.abs().max(1.0));
                    assert!(t.nodes[s.left].cover >= c.min_child_weight && t.nodes[s.right].cover >= c.min_child_weight);
                }
            }
        }
    }
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let d = random_classification(70, 5, 2);
    let c = GbtConfig { subsample: 0.6, colsample_bytree: 0.6, colsample_bylevel: 0.8, seed: 42, n_rounds: 20, ..cfg(Objective::Logistic) };
    let a = train(&d, &c).unwrap().to_json();
    assert_eq!(a, train(&d, &c).unwrap().to_json());
    assert_ne!(a, train(&d, &GbtConfig { seed: 43, ..c }).unwrap().to_json());
}

#[test]
fn ties_split_on_lowest_feature_and_threshold() {
    let rows: Vec<Vec<Option<f64>>> = (0..8).map(|i| vec![Some(f64::from(i % 4)), Some(f64::from(i % 4))]).collect();
    let y: Vec<f64> = (0..8).map(|i| if i % 4 >= 2 { 1.0 } else { 0.0 }).collect();
    let d = dataset(rows, y);
    let m = train(&d, &GbtConfig { n_rounds: 1, max_depth: 1, min_child_weight: 0.0, ..cfg(Objective::SquaredError) }).unwrap();
    let s = m.trees[0].nodes[0].split.as_ref().unwrap();
    assert_eq!((s.feature, s.threshold), (0, 1.5));
}

#[test]
fn missing_values_follow_learned_default() {
    // rows with a missing feature share the high target
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..12 {
        let v = if i < 4 { None } else { Some(f64::from(i)) };
        rows.push(vec![v]);
        y.push(if i < 4 || i >= 9 { 10.0 } else { 0.0 });
    }
    let d = dataset(rows, y);
    let m = train(&d, &GbtConfig { n_rounds: 1, max_depth: 1, min_child_weight: 0.0, ..cfg(Objective::SquaredError) }).unwrap();
    let s = m.trees[0].nodes[0].split.as_ref().unwrap();
    assert_eq!(s.threshold, 8.5);
    assert!(!s.default_left, "missing rows belong with the high side");
    let d2 = dataset(
        (0..12).map(|i| vec![if i < 4 { None } else { Some(f64::from(i)) }]).collect(),
        (0..12).map(|i| if i < 7 { 10.0 } else { 0.0 }).collect(),
    );
    let m2 = train(&d2, &GbtConfig { n_rounds: 1, max_depth: 1, min_child_weight: 0.0, ..cfg(Objective::SquaredError) }).unwrap();
    let s2 = m2.trees[0].nodes[0].split.as_ref().unwrap();
    assert_eq!(s2.threshold, 6.5);
    assert!(s2.default_left);
}

#[test]
fn label_swap_swaps_sensitivity_and_specificity() {
    let d = random_classification(100, 4, 21);
    let swapped_y: Vec<f64> = d.y().iter().map(|v| 1.0 - v).collect();
    let rows: Vec<Vec<Option<f64>>> = (0..d.n_rows()).map(|r| d.row(r)).collect();
    let swapped = Dataset::new(d.feature_names().to_vec(), &rows, swapped_y).unwrap();
    let c = GbtConfig { n_rounds: 10, max_depth: 2, ..cfg(Objective::Logistic) };
    let m = train(&d, &c).unwrap();
    let ms = train(&swapped, &c).unwrap();
    let called = |m: &GbtModel, data: &Dataset| -> Vec<bool> { m.predict_dataset(data).iter().map(|&p| p >= 0.5).collect() };
    let truth: Vec<bool> = d.y().iter().map(|&v| v == 1.0).collect();
    let truth_s: Vec<bool> = swapped.y().iter().map(|&v| v == 1.0).collect();
    let a = classification_metrics(&truth, &called(&m, &d)).unwrap();
    let b = classification_metrics(&truth_s, &called(&ms, &swapped)).unwrap();
    assert_eq!((a.sen, a.spe), (b.spe, b.sen));
}

#[test]
fn early_stopping_truncates() {
    let d = random_classification(100, 4, 4);
    let c = GbtConfig { n_rounds: 300, early_stopping_rounds: Some(20), ..cfg(Objective::Logistic) };
    let m = train(&d, &c).unwrap();
    assert!(!m.trees.is_empty() && m.trees.len() < 300);
}

#[test]
fn degenerate_targets_are_rejected() {
    let rows = vec![vec![Some(1.0)], vec![Some(2.0)]];
    assert!(matches!(train(&dataset(rows.clone(), vec![1.0, 1.0]), &cfg(Objective::Logistic)), Err(BoostError::DegenerateTarget(_))));
    assert!(matches!(train(&dataset(rows.clone(), vec![3.0, 3.0]), &cfg(Objective::SquaredError)), Err(BoostError::DegenerateTarget(_))));
    assert!(train(&dataset(rows, vec![0.0, 2.0]), &cfg(Objective::Logistic)).is_err());
}

fn matrix(n: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut meta = Vec::new();
    let mut rows = Vec::new();
    for i in 0..n {
        let dd = i % 2 == 0;
        let severity = if dd { 0.7 } else { 0.2 } + rng.random::<f64>() * 0.3;
        meta.push(RowMeta {
            subject_id: format!("s{i:03}"),
            sex: None,
            class_year: None,
            diagnosis: Some(if dd { Diagnosis::Dysgraphic } else { Diagnosis::Intact }),
            hpsqc: Some(HpsqcScore::new((severity * 12.0) as u8, 3, 4).unwrap()),
        });
        rows.push(vec![Some(severity * 10.0 + rng.random::<f64>()), Some(rng.random::<f64>()), None]);
    }
    FeatureMatrix::new(vec!["a".into(), "b".into(), "c".into()], meta, rows).unwrap()
}

#[test]
fn search_is_reproducible_and_reports_consistent_metrics() {
    let m = matrix(40, 1);
    let opts = SearchOptions {
        n_iter: 3,
        seed: 5,
        cv: CvOptions { k: 4, repeats: 2, seed: 5, confound_within_folds: None },
        base: GbtConfig { n_rounds: 10, ..GbtConfig::default() },
        ..SearchOptions::default()
    };
    let a = random_search(&m, Target::Diagnosis, &opts).unwrap();
    let b = random_search(&m, Target::Diagnosis, &opts).unwrap();
    assert_eq!(a.report.to_json(), b.report.to_json());
    assert_eq!(a.trials.len(), 3);
    let c = a.report.classification.as_ref().unwrap();
    assert!(c.bacc.mean > 0.9);
    assert_eq!(a.report.folds.len(), 8);
    for f in &a.report.folds {
        let fc = f.classification.unwrap();
        assert_eq!(fc.bacc, (fc.sen + fc.spe) / 2.0);
    }
    let grid = Grid::default();
    for t in &a.trials {
        assert!(grid.learning_rate.contains(&t.config.learning_rate));
        assert!(grid.max_depth.contains(&t.config.max_depth));
        assert!(grid.subsample.contains(&t.config.subsample));
    }

    let single = random_search(&m, Target::Diagnosis, &SearchOptions { n_iter: 1, ..opts.clone() }).unwrap();
    assert_eq!(single.best_index, 0);
    assert_eq!(single.best, a.trials[0].config);

    let reg = random_search(&m, Target::Legibility, &opts).unwrap();
    let r = reg.report.regression.as_ref().unwrap();
    for f in &reg.report.folds {
        let fr = f.regression.unwrap();
        assert_eq!(fr.rmse, fr.mse.sqrt());
        assert_eq!(fr.eer, 100.0 * fr.mae / 12.0);
    }
    assert!(r.eer.mean < 20.0);
}

#[test]
fn confound_within_folds_runs() {
    let mut m = matrix(24, 3);
    let meta: Vec<RowMeta> = m
        .meta()
        .iter()
        .enumerate()
        .map(|(i, r)| RowMeta { sex: Some(if i % 3 == 0 { crate::signal::Sex::Boy } else { crate::signal::Sex::Girl }), ..r.clone() })
        .collect();
    m = FeatureMatrix::new(m.columns().to_vec(), meta, m.rows().to_vec()).unwrap();
    let opts = CvOptions { k: 3, repeats: 1, seed: 0, confound_within_folds: Some(crate::stats::Confound::Sex) };
    let report = cross_validate(&m, Target::Diagnosis, &GbtConfig { n_rounds: 5, ..GbtConfig::default() }, &opts).unwrap();
    assert_eq!(report.folds.len(), 3);
}

#[test]
fn published_metric_identities() {
    // sensitivity / specificity pairs and the balanced accuracy they imply
    for (sen, spe, bacc) in [(88.6, 60.0, 74.3), (92.7, 74.6, 83.6)] {
        let m = ClassificationMetrics::from_counts((sen * 10.0) as u64, 1000 - (sen * 10.0) as u64, (spe * 10.0) as u64, 1000 - (spe * 10.0) as u64);
        assert!((100.0 * m.bacc - bacc).abs() <= 0.05 + 1e-9, "{}", 100.0 * m.bacc);
    }
    let table = [(2.16, 12.0, 17.96), (1.98, 12.0, 16.48), (2.45, 16.0, 15.34), (5.60, 40.0, 14.00), (1.79, 12.0, 14.90), (1.96, 12.0, 16.31), (2.67, 16.0, 16.69), (4.13, 40.0, 10.34)];
    for (mae, range, eer) in table {
        assert!((estimation_error_rate(mae, range) - eer).abs() < 0.1);
    }
}
