use super::BoostError;
use crate::features::FeatureMatrix;
use crate::stats::Target;

/// Column-major training data with per-feature row orders sorted by value.
/// Missing cells are stored as NaN and left out of the sorted orders.
#[derive(Debug, Clone)]
pub struct Dataset {
    feature_names: Vec<String>,
    n_rows: usize,
    values: Vec<f64>,
    sorted: Vec<Vec<u32>>,
    y: Vec<f64>,
    /// Row positions in the source matrix.
    source_rows: Vec<usize>,
}

impl Dataset {
    /// `rows` is row-major; non-finite cells count as missing.
    pub fn new(feature_names: Vec<String>, rows: &[Vec<Option<f64>>], y: Vec<f64>) -> Result<Self, BoostError> {
        if rows.len() != y.len() {
            return Err(BoostError::Data(format!("{} rows but {} targets", rows.len(), y.len())));
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(BoostError::Data(format!("non-finite target {bad}")));
        }
        let n_rows = rows.len();
        let n_cols = feature_names.len();
        let mut values = vec![f64::NAN; n_rows * n_cols];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(BoostError::Data(format!("row {r} has {} values, expected {n_cols}", row.len())));
            }
            for (c, v) in row.iter().enumerate() {
                if let Some(v) = v.filter(|v| v.is_finite()) {
                    values[c * n_rows + r] = v;
                }
            }
        }
        Ok(Self::from_columns(feature_names, n_rows, values, y, (0..n_rows).collect()))
    }

    fn from_columns(feature_names: Vec<String>, n_rows: usize, values: Vec<f64>, y: Vec<f64>, source_rows: Vec<usize>) -> Self {
        let sorted = (0..feature_names.len())
            .map(|c| {
                let col = &values[c * n_rows..(c + 1) * n_rows];
                let mut idx: Vec<u32> = (0..n_rows as u32).filter(|&r| !col[r as usize].is_nan()).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Dataset { feature_names, n_rows, values, sorted, y, source_rows }
    }

    /// Rows with a defined target, in matrix order.
    pub fn from_matrix(matrix: &FeatureMatrix, target: Target) -> Result<Self, BoostError> {
        let keep: Vec<usize> = (0..matrix.n_rows()).filter(|&r| target.value(&matrix.meta()[r]).is_some()).collect();
        if keep.is_empty() {
            return Err(BoostError::Data(format!("no row has target {target}")));
        }
        let rows: Vec<Vec<Option<f64>>> = keep.iter().map(|&r| matrix.row(r).to_vec()).collect();
        let y = keep.iter().map(|&r| target.value(&matrix.meta()[r]).expect("filtered")).collect();
        let mut d = Dataset::new(matrix.columns().to_vec(), &rows, y)?;
        d.source_rows = keep;
        Ok(d)
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * self.n_cols());
        for c in 0..self.n_cols() {
            values.extend(rows.iter().map(|&r| self.value(c, r)));
        }
        Self::from_columns(
            self.feature_names.clone(),
            n,
            values,
            rows.iter().map(|&r| self.y[r]).collect(),
            rows.iter().map(|&r| self.source_rows[r]).collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn source_rows(&self) -> &[usize] {
        &self.source_rows
    }

    /// NaN when missing.
    pub fn value(&self, c: usize, r: usize) -> f64 {
        self.values[c * self.n_rows + r]
    }

    pub(crate) fn column(&self, c: usize) -> &[f64] {
        &self.values[c * self.n_rows..(c + 1) * self.n_rows]
    }

    pub(crate) fn sorted(&self, c: usize) -> &[u32] {
        &self.sorted[c]
    }

    /// One row in feature order, NaN for missing.
    pub fn dense_row(&self, r: usize) -> Vec<f64> {
        (0..self.n_cols()).map(|c| self.value(c, r)).collect()
    }

    pub fn row(&self, r: usize) -> Vec<Option<f64>> {
        (0..self.n_cols()).map(|c| Some(self.value(c, r)).filter(|v| !v.is_nan())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_orders_skip_missing_and_break_ties_by_row() {
        let rows = vec![
            vec![Some(3.0), None],
            vec![Some(1.0), Some(2.0)],
            vec![Some(3.0), Some(f64::INFINITY)],
            vec![None, Some(-1.0)],
        ];
        let d = Dataset::new(vec!["a".into(), "b".into()], &rows, vec![0.0; 4]).unwrap();
        assert_eq!(d.sorted(0), &[1, 0, 2]);
        assert_eq!(d.sorted(1), &[3, 1]);
        assert!(d.value(1, 2).is_nan());
        let s = d.subset(&[2, 3]);
        assert_eq!(s.sorted(0), &[0]);
        assert_eq!(s.row(1), vec![None, Some(-1.0)]);
        assert_eq!(s.source_rows(), &[2, 3]);
    }
}
