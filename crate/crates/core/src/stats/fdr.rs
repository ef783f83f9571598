/// Benjamini-Hochberg step-up adjustment, returned in input order.
pub fn fdr_bh(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (pos, &i) in order.iter().enumerate().rev() {
        // the factor m/k is >= 1, so rounding never pushes the result below p
        running = running.min(p[i] * (m as f64 / (pos + 1) as f64));
        adjusted[i] = running.min(1.0);
    }
    adjusted
}
