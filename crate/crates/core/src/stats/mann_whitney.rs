use super::{ranks, StatResult, StatsError, TestKind};
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest group size for which the exact null distribution is used.
pub const EXACT_MAX_GROUP: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwMethod {
    /// Exact when both groups have at most [`EXACT_MAX_GROUP`] values and
    /// there are no ties, normal approximation otherwise.
    Auto,
    Exact,
    /// Normal approximation with tie and continuity corrections.
    Asymptotic,
}

/// Two-sided Mann-Whitney U test. `statistic` is U for group `a`; a positive
/// `direction` means `a` tends to be larger.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<StatResult, StatsError> {
    mann_whitney_u_with(a, b, MwMethod::Auto)
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: MwMethod) -> Result<StatResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptyGroup);
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (r, tie_sizes) = ranks(&pooled);
    let rank_sum_a: f64 = r[..na].iter().sum();
    let u = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let mean = (na * nb) as f64 / 2.0;
    let has_ties = tie_sizes.iter().any(|&t| t > 1);

    let exact = match method {
        MwMethod::Auto => !has_ties && na <= EXACT_MAX_GROUP && nb <= EXACT_MAX_GROUP,
        MwMethod::Exact if has_ties => return Err(StatsError::ExactWithTies),
        MwMethod::Exact => true,
        MwMethod::Asymptotic => false,
    };
    let p = if exact {
        exact_p(u, na, nb)
    } else {
        asymptotic_p(u, na, nb, &tie_sizes)
    };
    let direction = if u > mean {
        1
    } else if u < mean {
        -1
    } else {
        0
    };
    Ok(StatResult {
        feature: String::new(),
        test: TestKind::MannWhitney,
        statistic: Some(u),
        rho: None,
        p: Some(p),
        p_fdr: None,
        n_effective: na + nb,
        direction,
        note: None,
    })
}

/// Number of rank arrangements giving each U in `0..=na*nb`.
pub fn u_distribution(na: usize, nb: usize) -> Vec<f64> {
    // counts[i][j][u]: arrangements of i values from A and j from B with U = u,
    // built by deciding whether the largest value belongs to A (adds j) or B.
    let max_u = na * nb;
    let mut prev: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; nb + 1];
    for row in prev.iter_mut() {
        row[0] = 1.0;
    }
    for i in 1..=na {
        let mut cur: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; nb + 1];
        cur[0][0] = 1.0;
        for j in 1..=nb {
            for u in 0..=i * j {
                let from_a = if u >= j { prev[j][u - j] } else { 0.0 };
                cur[j][u] = from_a + cur[j - 1][u];
            }
        }
        prev = cur;
    }
    prev.swap_remove(nb)
}

fn exact_p(u: f64, na: usize, nb: usize) -> f64 {
    let counts = u_distribution(na, nb);
    let total: f64 = counts.iter().sum();
    let k = u.round() as usize;
    let lower: f64 = counts[..=k].iter().sum::<f64>() / total;
    let upper: f64 = counts[k..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

fn asymptotic_p(u: f64, na: usize, nb: usize, tie_sizes: &[usize]) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    let n = na + nb;
    let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum();
    let variance = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((u - na * nb / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z)).min(1.0)
}
