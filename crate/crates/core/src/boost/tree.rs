use super::dataset::Dataset;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Values strictly below go left.
    pub threshold: f64,
    /// Direction taken by missing values.
    pub default_left: bool,
    pub left: usize,
    pub right: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Hessian sum of the training rows that reached this node.
    pub cover: f64,
    /// Leaf output (already scaled by the learning rate); 0 for internal nodes.
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// A regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, cover: f64) -> Tree {
        Tree { nodes: vec![Node { cover, value, split: None }] }
    }

    /// Leaf reached by a row whose feature values are given by `get` (NaN = missing).
    pub fn leaf_index(&self, get: impl Fn(usize) -> f64) -> usize {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            i = s.child(get(s.feature));
        }
        i
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_index(|f| row[f])].value
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i].split {
                None => 0,
                Some(s) => 1 + walk(t, s.left).max(walk(t, s.right)),
            }
        }
        walk(self, 0)
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.nodes[i].split.is_none()
    }
}

impl Split {
    pub fn child(&self, v: f64) -> usize {
        let left = if v.is_nan() { self.default_left } else { v < self.threshold };
        if left {
            self.left
        } else {
            self.right
        }
    }
}

pub(crate) struct TreeParams {
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub colsample_bylevel: f64,
}

/// Keeps `max(1, floor(fraction * n))` of `features`, in ascending order.
pub(crate) fn sample_features<R: Rng>(features: &[usize], fraction: f64, rng: &mut R) -> Vec<usize> {
    if fraction >= 1.0 || features.len() <= 1 {
        return features.to_vec();
    }
    let k = ((fraction * features.len() as f64).floor() as usize).max(1);
    let mut picked: Vec<usize> = index::sample(rng, features.len(), k).into_iter().map(|i| features[i]).collect();
    picked.sort_unstable();
    picked
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    default_left: bool,
    g_left: f64,
    h_left: f64,
}

impl Candidate {
    /// Higher gain wins; ties go to the lower feature, then the lower threshold.
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(b) => {
                self.gain > b.gain
                    || (self.gain == b.gain
                        && (self.feature < b.feature || (self.feature == b.feature && self.threshold < b.threshold)))
            }
        }
    }
}

const NO_NODE: u32 = u32::MAX;

/// Grows one tree level by level with exact greedy split search. Rows with
/// `in_sample[r] == false` do not take part.
pub(crate) fn grow_tree<R: Rng>(
    data: &Dataset,
    grad: &[f64],
    hess: &[f64],
    in_sample: &[bool],
    features: &[usize],
    p: &TreeParams,
    rng: &mut R,
) -> Tree {
    let n = data.n_rows();
    let mut node_of: Vec<u32> = in_sample.iter().map(|&s| if s { 0 } else { NO_NODE }).collect();
    let (mut g0, mut h0) = (0.0, 0.0);
    for r in (0..n).filter(|&r| in_sample[r]) {
        g0 += grad[r];
        h0 += hess[r];
    }
    let mut nodes = vec![Node { cover: h0, value: 0.0, split: None }];
    let mut sums = vec![(g0, h0)];
    let mut frontier = vec![0usize];
    let mut depth = 0;

    let score = |g: f64, h: f64| if h + p.lambda > 0.0 { g * g / (h + p.lambda) } else { 0.0 };

    while !frontier.is_empty() && depth < p.max_depth {
        let level_features = sample_features(features, p.colsample_bylevel, rng);
        let m = frontier.len();
        let mut slot = vec![NO_NODE; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            slot[id] = s as u32;
        }
        let mut node_rows = vec![0usize; m];
        for &id in &node_of {
            if id != NO_NODE && slot[id as usize] != NO_NODE {
                node_rows[slot[id as usize] as usize] += 1;
            }
        }

        let mut best: Vec<Option<Candidate>> = vec![None; m];
        let mut acc_g = vec![0.0; m];
        let mut acc_h = vec![0.0; m];
        let mut last = vec![f64::NAN; m];
        let mut count = vec![0usize; m];

        let consider = |best: &mut Vec<Option<Candidate>>, s: usize, feature: usize, lo: f64, hi: f64, g_left: f64, h_left: f64, default_left: bool| {
            let (g, h) = sums[frontier[s]];
            let (g_right, h_right) = (g - g_left, h - h_left);
            if h_left < p.min_child_weight || h_right < p.min_child_weight {
                return;
            }
            let gain = 0.5 * (score(g_left, h_left) + score(g_right, h_right) - score(g, h)) - p.gamma;
            if !(gain > 0.0) {
                return;
            }
            let mid = lo + (hi - lo) / 2.0;
            let threshold = if mid > lo { mid } else { hi };
            let c = Candidate { gain, feature, threshold, default_left, g_left, h_left };
            if c.beats(&best[s]) {
                best[s] = Some(c);
            }
        };

        for &f in &level_features {
            let col = data.column(f);
            let order = data.sorted(f);
            acc_g.iter_mut().for_each(|v| *v = 0.0);
            acc_h.iter_mut().for_each(|v| *v = 0.0);
            count.iter_mut().for_each(|v| *v = 0);
            // ascending: missing values go right
            for &r in order {
                let r = r as usize;
                let id = node_of[r];
                if id == NO_NODE || slot[id as usize] == NO_NODE {
                    continue;
                }
                let s = slot[id as usize] as usize;
                let v = col[r];
                if count[s] > 0 && v > last[s] {
                    consider(&mut best, s, f, last[s], v, acc_g[s], acc_h[s], false);
                }
                acc_g[s] += grad[r];
                acc_h[s] += hess[r];
                last[s] = v;
                count[s] += 1;
            }
            if (0..m).all(|s| count[s] == node_rows[s]) {
                continue;
            }
            // descending: missing values go left, only where some are missing
            let has_missing: Vec<bool> = (0..m).map(|s| count[s] < node_rows[s]).collect();
            acc_g.iter_mut().for_each(|v| *v = 0.0);
            acc_h.iter_mut().for_each(|v| *v = 0.0);
            count.iter_mut().for_each(|v| *v = 0);
            for &r in order.iter().rev() {
                let r = r as usize;
                let id = node_of[r];
                if id == NO_NODE || slot[id as usize] == NO_NODE {
                    continue;
                }
                let s = slot[id as usize] as usize;
                if !has_missing[s] {
                    continue;
                }
                let v = col[r];
                if count[s] > 0 && v < last[s] {
                    let (g, h) = sums[frontier[s]];
                    consider(&mut best, s, f, v, last[s], g - acc_g[s], h - acc_h[s], true);
                }
                acc_g[s] += grad[r];
                acc_h[s] += hess[r];
                last[s] = v;
                count[s] += 1;
            }
        }

        let mut next = Vec::new();
        for (s, &id) in frontier.iter().enumerate() {
            let Some(c) = best[s] else { continue };
            let (g, h) = sums[id];
            let left = nodes.len();
            nodes.push(Node { cover: c.h_left, value: 0.0, split: None });
            nodes.push(Node { cover: h - c.h_left, value: 0.0, split: None });
            sums.push((c.g_left, c.h_left));
            sums.push((g - c.g_left, h - c.h_left));
            nodes[id].split = Some(Split {
                feature: c.feature,
                threshold: c.threshold,
                default_left: c.default_left,
                left,
                right: left + 1,
                gain: c.gain,
            });
            next.push(left);
            next.push(left + 1);
        }
        if next.is_empty() {
            break;
        }
        for (r, id) in node_of.iter_mut().enumerate() {
            if *id == NO_NODE || slot[*id as usize] == NO_NODE {
                continue;
            }
            if let Some(sp) = &nodes[*id as usize].split {
                *id = sp.child(data.value(sp.feature, r)) as u32;
            }
        }
        frontier = next;
        depth += 1;
    }

    for (node, &(g, h)) in nodes.iter_mut().zip(&sums) {
        if node.split.is_none() && h + p.lambda > 0.0 {
            node.value = -g / (h + p.lambda) * p.learning_rate;
        }
    }
    Tree { nodes }
}
