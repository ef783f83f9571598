//! Oracles and fixtures shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use graphomotor::boost::{GbtConfig, GbtModel, Node, Split, Tree, MODEL_FORMAT_VERSION};
use graphomotor::features::{catalog, extract_session, Aggregation, FeatureGroup, FeatureValue};
use graphomotor::signal::{segment_strokes, Surface};
use graphomotor::synth::{generate_subject, CohortSpec, EffectFactors};
use graphomotor::{FeatureConfig, Session};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

// ---------------------------------------------------------------- sessions

/// One session from a randomly parameterized cohort.
pub fn random_session(seed: u64) -> Session {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = || rng.random_range(0.5..2.0);
    let factors = EffectFactors {
        in_air_duration: f(),
        interruption_rate: f(),
        stroke_height: f(),
        angular_velocity_ncv: f(),
        in_air_tempo: f(),
    };
    let spec = CohortSpec {
        n_intact: 1,
        n_dd: 1,
        seed: rng.random(),
        factors,
        subject_noise: rng.random_range(0.0..2.0),
        stroke_noise: rng.random_range(0.0..2.0),
        strokes_per_session: rng.random_range(2..=30),
        ..CohortSpec::default()
    };
    generate_subject(&spec, rng.random_range(0..2)).0
}

pub fn features(session: &Session) -> Vec<FeatureValue> {
    extract_session(session, &FeatureConfig::default()).expect("synthetic sessions extract")
}

fn get(fs: &[FeatureValue], name: &str) -> Option<f64> {
    fs.iter().find(|f| f.name == name).expect("feature exists").value
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn compare(name: &str, got: Option<f64>, want: Option<f64>, tol: f64) -> Check {
    match (got, want) {
        (None, None) => Ok(()),
        (Some(a), Some(b)) if close(a, b, tol) => Ok(()),
        _ => Err(format!("{name}: got {got:?}, expected {want:?}")),
    }
}

/// Spatial units scale with the positions; angles, times, ratios and
/// entropies do not.
fn spatial_power(group: FeatureGroup, signal: &str, aggregation: Aggregation) -> i32 {
    let spatial = matches!(group, FeatureGroup::Spatial)
        || (matches!(group, FeatureGroup::Kinematic) && signal != "angular_velocity");
    i32::from(spatial && aggregation != Aggregation::Ncv)
}

/// Positions multiplied by `2^j`; a power of two keeps every intermediate
/// exact, so histogram bin edges cannot shift.
pub fn check_scale_equivariance(session: &Session, j: i32) -> Check {
    let k = 2f64.powi(j);
    let mut scaled = session.clone();
    for s in &mut scaled.samples {
        s.x *= k;
        s.y *= k;
    }
    let (base, other) = (features(session), features(&scaled));
    for spec in catalog() {
        let factor = k.powi(spatial_power(spec.group, &spec.signal, spec.aggregation));
        compare(&spec.name, get(&other, &spec.name), get(&base, &spec.name).map(|v| v * factor), 1e-9)?;
    }
    Ok(())
}

/// Shifts timestamps by `shift` seconds after moving the session to start
/// at 256 s, so both versions live in the same binade and differences of
/// timestamps are identical.
pub fn check_time_shift_invariance(session: &Session, shift: f64) -> Check {
    assert!((0.0..100.0).contains(&shift));
    let t0 = session.samples[0].t;
    let mut base = session.clone();
    for s in &mut base.samples {
        s.t = s.t - t0 + 256.0;
    }
    let mut shifted = base.clone();
    for s in &mut shifted.samples {
        s.t += shift;
    }
    let (a, b) = (features(&base), features(&shifted));
    for spec in catalog() {
        compare(&spec.name, get(&b, &spec.name), get(&a, &spec.name), 1e-9)?;
    }
    Ok(())
}

/// Non-boundary stroke counts per surface, straight from segmentation.
fn stroke_counts(session: &Session) -> (usize, usize) {
    let strokes = segment_strokes(&session.samples);
    let on: Vec<usize> = strokes.iter().filter(|s| s.surface == Surface::OnSurface).map(|s| s.index).collect();
    let (first, last) = (on[0], *on.last().unwrap());
    let air = strokes.iter().filter(|s| s.surface == Surface::InAir && s.index > first && s.index < last).count();
    (on.len(), air)
}

pub fn check_tempo_duration(session: &Session) -> Check {
    let fs = features(session);
    let (n_on, n_air) = stroke_counts(session);
    let on = get(&fs, "tempo:on_surface:none").unwrap() * get(&fs, "duration_writing:on_surface:none").unwrap();
    if !close(on, n_on as f64, 1e-9) {
        return Err(format!("on-surface tempo x duration = {on}, strokes = {n_on}"));
    }
    match get(&fs, "tempo:in_air:none") {
        Some(t) => {
            let air = t * get(&fs, "duration_writing:in_air:none").unwrap();
            if !close(air, n_air as f64, 1e-9) {
                return Err(format!("in-air tempo x duration = {air}, strokes = {n_air}"));
            }
        }
        None if n_air == 0 => {}
        None => return Err("in-air tempo missing".into()),
    }
    Ok(())
}

pub fn check_entropy_bounds(session: &Session) -> Check {
    let fs = features(session);
    let bins = FeatureConfig::default().entropy_bins as f64;
    let eps = 1e-9;
    for surface in ["on_surface", "in_air"] {
        let joint = get(&fs, &format!("entropy:{surface}:none"));
        let hx = get(&fs, &format!("entropy:horizontal:{surface}:none"));
        let hy = get(&fs, &format!("entropy:vertical:{surface}:none"));
        let (Some(j), Some(x), Some(y)) = (joint, hx, hy) else {
            if joint.is_none() && hx.is_none() && hy.is_none() {
                continue;
            }
            return Err(format!("{surface}: partially missing entropies"));
        };
        let ok = (-eps..=bins.log2() + eps).contains(&x)
            && (-eps..=bins.log2() + eps).contains(&y)
            && j >= x.max(y) - eps
            && j <= x + y + eps
            && j <= 2.0 * bins.log2() + eps;
        if !ok {
            return Err(format!("{surface}: H = {j}, Hx = {x}, Hy = {y}"));
        }
    }
    Ok(())
}

/// Type-7 quantile written out independently of the library.
fn oracle_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] * (1.0 - (pos - i as f64)) + sorted[i + 1] * (pos - i as f64)
}

fn oracle_ncv(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    let iqr = oracle_quantile(&v, 0.75) - oracle_quantile(&v, 0.25);
    (iqr != 0.0).then(|| median / iqr)
}

/// Stroke-duration and stroke-height ncv against median/IQR recomputed from
/// the raw segmentation.
pub fn check_ncv(session: &Session) -> Check {
    let fs = features(session);
    let strokes = segment_strokes(&session.samples);
    let mut durations = Vec::new();
    let mut heights = Vec::new();
    for (i, s) in strokes.iter().enumerate() {
        if s.surface != Surface::OnSurface {
            continue;
        }
        let end = match strokes.get(i + 1) {
            Some(next) => next.samples[0].t,
            None => s.samples.last().unwrap().t + 1.0 / session.sampling_rate(),
        };
        durations.push(end - s.samples[0].t);
        let ys = s.samples.iter().map(|p| p.y);
        heights.push(ys.clone().fold(f64::NEG_INFINITY, f64::max) - ys.fold(f64::INFINITY, f64::min));
    }
    compare("stroke_duration:on_surface:ncv", get(&fs, "stroke_duration:on_surface:ncv"), oracle_ncv(durations), 1e-9)?;
    compare("stroke_height:on_surface:ncv", get(&fs, "stroke_height:on_surface:ncv"), oracle_ncv(heights), 1e-9)
}

// ---------------------------------------------------------------- statistics

/// All `k`-subsets of `0..n` as bitmasks.
pub fn subsets(n: usize, k: usize) -> Vec<u32> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize == k).collect()
}

/// U of the subset `mask` of the ranks `1..=n` (group a) against the rest.
pub fn u_of_mask(mask: u32, n: usize) -> usize {
    let mut u = 0;
    for i in 0..n {
        if mask & (1 << i) != 0 {
            u += (0..i).filter(|j| mask & (1 << j) == 0).count();
        }
    }
    u
}

/// Two-sided exact p of `u_obs` by enumerating every assignment of ranks.
pub fn enumerated_p(u_obs: usize, all_u: &[usize]) -> f64 {
    let total = all_u.len() as f64;
    let le = all_u.iter().filter(|&&u| u <= u_obs).count() as f64 / total;
    let ge = all_u.iter().filter(|&&u| u >= u_obs).count() as f64 / total;
    (2.0 * le.min(ge)).min(1.0)
}

/// Average ranks by counting, O(n^2).
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

// ---------------------------------------------------------------- shapley

/// Value of a coalition: features in `mask` follow the row, the others take
/// the cover-weighted average of both children.
fn coalition_value(tree: &Tree, node: usize, row: &[f64], mask: u32) -> f64 {
    let n = &tree.nodes[node];
    match &n.split {
        None => n.value,
        Some(s) if mask & (1 << s.feature) != 0 => coalition_value(tree, s.child(row[s.feature]), row, mask),
        Some(s) => {
            let (l, r) = (&tree.nodes[s.left], &tree.nodes[s.right]);
            (l.cover * coalition_value(tree, s.left, row, mask) + r.cover * coalition_value(tree, s.right, row, mask))
                / n.cover
        }
    }
}

/// Shapley values from the 2^d coalition definition.
pub fn brute_force_shapley(model: &GbtModel, row: &[f64]) -> Vec<f64> {
    let m = model.feature_names.len();
    let v = |mask: u32| model.base_score + model.trees.iter().map(|t| coalition_value(t, 0, row, mask)).sum::<f64>();
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    (0..m)
        .map(|i| {
            (0u32..1 << m)
                .filter(|s| s & (1 << i) == 0)
                .map(|s| {
                    let size = s.count_ones() as usize;
                    fact(size) * fact(m - size - 1) / fact(m) * (v(s | (1 << i)) - v(s))
                })
                .sum()
        })
        .collect()
}

fn random_tree(rng: &mut ChaCha8Rng, n_features: usize, max_depth: usize) -> Tree {
    fn grow(rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>, at: usize, depth: usize, nf: usize, max_depth: usize) {
        if depth == max_depth || rng.random::<f64>() < 0.25 {
            nodes[at].value = rng.random::<f64>() * 2.0 - 1.0;
            return;
        }
        let u = 0.1 + 0.8 * rng.random::<f64>();
        let cover = nodes[at].cover;
        let left = nodes.len();
        nodes.push(Node { cover: cover * u, value: 0.0, split: None });
        nodes.push(Node { cover: cover * (1.0 - u), value: 0.0, split: None });
        nodes[at].split = Some(Split {
            feature: rng.random_range(0..nf),
            threshold: rng.random::<f64>(),
            default_left: rng.random::<bool>(),
            left,
            right: left + 1,
            gain: 1.0,
        });
        grow(rng, nodes, left, depth + 1, nf, max_depth);
        grow(rng, nodes, left + 1, depth + 1, nf, max_depth);
    }
    let mut nodes = vec![Node { cover: 10.0 + rng.random::<f64>() * 90.0, value: 0.0, split: None }];
    grow(rng, &mut nodes, 0, 0, n_features, max_depth);
    Tree { nodes }
}

/// A hand-rolled ensemble with random structure, covers and leaf values.
pub fn random_model(rng: &mut ChaCha8Rng, n_features: usize) -> GbtModel {
    let n_trees = rng.random_range(1..5);
    GbtModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_names: (0..n_features).map(|i| format!("f{i}")).collect(),
        config: GbtConfig::default(),
        base_score: rng.random::<f64>() - 0.5,
        trees: (0..n_trees).map(|_| random_tree(rng, n_features, 5)).collect(),
    }
}

/// Uniform row with roughly 10% missing cells.
pub fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<f64>() < 0.1 { f64::NAN } else { rng.random::<f64>() }).collect()
}
