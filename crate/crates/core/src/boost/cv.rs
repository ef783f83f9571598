use super::BoostError;
use crate::features::quantile;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Test-fold assignments: `assignments[repeat][row]` is the fold of `row`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Folds {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub assignments: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Folds {
    pub fn n_rows(&self) -> usize {
        self.assignments.first().map_or(0, Vec::len)
    }

    /// (train rows, test rows) for one fold of one repeat.
    pub fn split(&self, repeat: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let a = &self.assignments[repeat];
        let (test, train): (Vec<usize>, Vec<usize>) = (0..a.len()).partition(|&r| a[r] == fold);
        (train, test)
    }

    /// Every (repeat, fold) pair in order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.repeats).flat_map(move |r| (0..self.k).map(move |f| (r, f)))
    }
}

/// Stratum of each row for a continuous target: its quartile bin.
pub fn quartile_strata(y: &[f64]) -> Vec<usize> {
    let cuts = [0.25, 0.5, 0.75].map(|q| quantile(y, q).unwrap_or(f64::INFINITY));
    y.iter().map(|v| cuts.iter().filter(|&&c| *v > c).count()).collect()
}

/// Stratum of each row for 0/1 labels.
pub fn label_strata(y: &[f64]) -> Vec<usize> {
    y.iter().map(|&v| usize::from(v == 1.0)).collect()
}

/// Repeated stratified k-fold. Within each repeat the members of every
/// stratum are shuffled and dealt round-robin to the folds, the dealing
/// position carrying over from one stratum to the next so fold sizes stay
/// balanced. `k` shrinks (to at least 2) when a stratum is smaller than it.
pub fn stratified_repeated_kfold(strata: &[usize], k: usize, repeats: usize, seed: u64) -> Result<Folds, BoostError> {
    let n = strata.len();
    if n < 2 {
        return Err(BoostError::Data(format!("cross-validation needs at least 2 rows, got {n}")));
    }
    if k < 2 || repeats == 0 {
        return Err(BoostError::Config(format!("need k >= 2 and repeats >= 1, got k = {k}, repeats = {repeats}")));
    }
    let n_strata = strata.iter().max().map_or(0, |m| m + 1);
    let members: Vec<Vec<usize>> = (0..n_strata).map(|s| (0..n).filter(|&r| strata[r] == s).collect()).collect();
    let smallest = members.iter().map(Vec::len).filter(|&l| l > 0).min().unwrap_or(n);
    let mut warnings = Vec::new();
    let mut k_used = k.min(n);
    if smallest < k_used {
        k_used = smallest.max(2);
        warnings.push(format!("smallest stratum has {smallest} rows; using {k_used} folds instead of {k}"));
    } else if k_used < k {
        warnings.push(format!("only {n} rows; using {k_used} folds instead of {k}"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let mut assignments = Vec::with_capacity(repeats);
    for rep in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64);
        let mut fold_of = vec![0usize; n];
        let mut next = 0usize;
        for group in &members {
            let mut g = group.clone();
            g.shuffle(&mut rng);
            for r in g {
                fold_of[r] = next % k_used;
                next += 1;
            }
        }
        assignments.push(fold_of);
    }
    Ok(Folds { k: k_used, repeats, seed, assignments, warnings })
}
