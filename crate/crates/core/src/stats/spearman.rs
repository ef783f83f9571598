use super::{ranks, StatResult, StatsError, TestKind};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Largest sample size for which the p value comes from full permutation.
pub const SPEARMAN_EXACT_MAX: usize = 10;

/// Pearson correlation of average-tie ranks; `None` when either variable is constant.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Option<f64> {
    let (cx, cy) = centered_ranks(x, y)?;
    Some(dot(&cx, &cy) / (dot(&cx, &cx) * dot(&cy, &cy)).sqrt())
}

/// Spearman correlation with a two-sided p value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<StatResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::Length(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewPairs(n));
    }
    let Some((cx, cy)) = centered_ranks(x, y) else {
        return Ok(StatResult::undefined(TestKind::Spearman, n, "zero rank variance"));
    };
    let norm = (dot(&cx, &cx) * dot(&cy, &cy)).sqrt();
    let rho = (dot(&cx, &cy) / norm).clamp(-1.0, 1.0);
    let p = if n <= SPEARMAN_EXACT_MAX {
        permutation_p(&cx, cy, rho, norm)
    } else {
        t_p(rho, n)
    };
    Ok(StatResult {
        feature: String::new(),
        test: TestKind::Spearman,
        statistic: Some(rho),
        rho: Some(rho),
        p: Some(p),
        p_fdr: None,
        n_effective: n,
        direction: if rho > 0.0 {
            1
        } else if rho < 0.0 {
            -1
        } else {
            0
        },
        note: None,
    })
}

fn centered_ranks(x: &[f64], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let center = |v: &[f64]| {
        let (r, _) = ranks(v);
        let mean = (v.len() + 1) as f64 / 2.0;
        r.into_iter().map(|k| k - mean).collect::<Vec<f64>>()
    };
    let (cx, cy) = (center(x), center(y));
    // centered ranks are multiples of 0.5, so the sums of squares are exact
    if dot(&cx, &cx) == 0.0 || dot(&cy, &cy) == 0.0 {
        return None;
    }
    Some((cx, cy))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fraction of the n! pairings with |rho| at least the observed one.
fn permutation_p(cx: &[f64], mut cy: Vec<f64>, rho: f64, norm: f64) -> f64 {
    let n = cx.len();
    // compare on the dot-product scale, with slack for rounding
    let threshold = rho.abs() * norm - 1e-9;
    let mut s = dot(cx, &cy);
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut visit = |s: f64| {
        total += 1;
        if s.abs() >= threshold {
            hits += 1;
        }
    };
    visit(s);
    // Heap's algorithm, updating the dot product per swap
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            let j = if i % 2 == 0 { 0 } else { c[i] };
            s += (cx[j] - cx[i]) * (cy[i] - cy[j]);
            cy.swap(i, j);
            visit(s);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

fn t_p(rho: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_ranked_example() {
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 3.0, 2.0, 5.0, 4.0]).unwrap();
        assert_eq!(r.rho, Some(0.8));
        // permutations of 5 with sum d^2 <= 4 or >= 36: 1 + 4 + 3 = 8 on each side
        assert!((r.p.unwrap() - 16.0 / 120.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_relations() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let up: Vec<f64> = x.iter().map(|v| v * v).collect();
        let down: Vec<f64> = x.iter().map(|v| -v.exp()).collect();
        assert_eq!(spearman(&x, &up).unwrap().rho, Some(1.0));
        assert_eq!(spearman(&x, &down).unwrap().rho, Some(-1.0));
        assert_eq!(spearman(&x[..5], &up[..5]).unwrap().p, Some(2.0 / 120.0));
    }

    #[test]
    fn constant_variable_is_undefined() {
        let r = spearman(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).unwrap();
        assert!(r.rho.is_none() && r.p.is_none());
        assert!(r.note.is_some());
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooFewPairs(2)));
    }

    #[test]
    fn t_approximation_reference_value() {
        // rho = 0.5, n = 30: t = 0.5 * sqrt(28 / 0.75), reference two-sided p from scipy.stats.t
        let p = t_p(0.5, 30);
        assert!((p - 0.004899933667068).abs() < 1e-12, "{p}");
    }

    proptest::proptest! {
        #[test]
        fn symmetric_invariant_and_sign_flipping(
            pairs in proptest::collection::vec((-20i32..20, -20i32..20), 3..25),
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let rho = spearman_rho(&x, &y);
            proptest::prop_assert_eq!(rho, spearman_rho(&y, &x));
            let gx: Vec<f64> = x.iter().map(|v| (v / 7.0).exp() + 3.0 * v).collect();
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            if let Some(r) = rho {
                proptest::prop_assert!((spearman_rho(&gx, &y).unwrap() - r).abs() < 1e-12);
                proptest::prop_assert!((spearman_rho(&x, &neg).unwrap() + r).abs() < 1e-12);
                let res = spearman(&x, &y).unwrap();
                let p = res.p.unwrap();
                proptest::prop_assert!(p > 0.0 && p <= 1.0 || r.abs() == 1.0);
            }
        }
    }
}
