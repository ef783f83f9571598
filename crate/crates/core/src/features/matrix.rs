use crate::signal::{Diagnosis, HpsqcScore, Session, Sex};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Per-row metadata carried alongside the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMeta {
    pub subject_id: String,
    pub sex: Option<Sex>,
    pub class_year: Option<u8>,
    pub diagnosis: Option<Diagnosis>,
    pub hpsqc: Option<HpsqcScore>,
}

impl RowMeta {
    pub fn of(session: &Session) -> Self {
        let m = &session.meta;
        RowMeta {
            subject_id: m.subject_id.clone(),
            sex: m.sex,
            class_year: m.class_year,
            diagnosis: m.diagnosis,
            hpsqc: m.hpsqc,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MatrixError {
    #[error("row {row} has {found} values, expected {expected}")]
    Width { row: usize, found: usize, expected: usize },
    #[error("{0} meta rows for {1} value rows")]
    Rows(usize, usize),
    #[error("unknown feature column {0:?}")]
    UnknownColumn(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed matrix file: {0}")]
    Format(String),
}

/// Sessions x features, with `None` marking missing cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    meta: Vec<RowMeta>,
    values: Vec<Vec<Option<f64>>>,
}

const META_COLUMNS: [&str; 8] = [
    "subject_id",
    "sex",
    "class_year",
    "diagnosis",
    "hpsqc_legibility",
    "hpsqc_performance_time",
    "hpsqc_well_being",
    "hpsqc_total",
];

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, meta: Vec<RowMeta>, values: Vec<Vec<Option<f64>>>) -> Result<Self, MatrixError> {
        if meta.len() != values.len() {
            return Err(MatrixError::Rows(meta.len(), values.len()));
        }
        for (row, v) in values.iter().enumerate() {
            if v.len() != columns.len() {
                return Err(MatrixError::Width { row, found: v.len(), expected: columns.len() });
            }
        }
        Ok(FeatureMatrix { columns, meta, values })
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn meta(&self) -> &[RowMeta] {
        &self.meta
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[Option<f64>] {
        &self.values[r]
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        self.values[r][c]
    }

    pub fn is_missing(&self, r: usize, c: usize) -> bool {
        self.values[r][c].is_none()
    }

    pub fn mask(&self) -> Vec<Vec<bool>> {
        self.values.iter().map(|r| r.iter().map(Option::is_none).collect()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, c: usize) -> Vec<Option<f64>> {
        self.values.iter().map(|r| r[c]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<Option<f64>>, MatrixError> {
        let c = self.column_index(name).ok_or_else(|| MatrixError::UnknownColumn(name.to_string()))?;
        Ok(self.column(c))
    }

    /// Replaces one column in place.
    pub fn set_column(&mut self, c: usize, values: &[Option<f64>]) {
        assert_eq!(values.len(), self.n_rows());
        for (row, v) in self.values.iter_mut().zip(values) {
            row[c] = *v;
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self.columns.clone(),
            meta: rows.iter().map(|&r| self.meta[r].clone()).collect(),
            values: rows.iter().map(|&r| self.values[r].clone()).collect(),
        }
    }

    /// Keeps the rows whose metadata satisfies `keep`.
    pub fn filter_rows(&self, keep: impl Fn(&RowMeta) -> bool) -> FeatureMatrix {
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&r| keep(&self.meta[r])).collect();
        self.select_rows(&rows)
    }

    /// Writes CSV with an optional leading `#` comment line.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> Result<(), MatrixError> {
        if let Some(c) = comment {
            writeln!(out, "# {}", c.replace('\n', " ")).map_err(csv::Error::from)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(META_COLUMNS.iter().copied().chain(self.columns.iter().map(String::as_str)))?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for (m, values) in self.meta.iter().zip(&self.values) {
            let mut record = vec![
                m.subject_id.clone(),
                opt(m.sex.map(|s| enum_name(&s))),
                opt(m.class_year.map(|y| y.to_string())),
                opt(m.diagnosis.map(|d| enum_name(&d))),
            ];
            for part in crate::signal::ScorePart::ALL {
                record.push(opt(m.hpsqc.map(|h| h.get(part).to_string())));
            }
            record.extend(values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&record)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self, comment: Option<&str>) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, comment).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads the CSV layout written by [`write_csv`](Self::write_csv); `#` lines are skipped.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, MatrixError> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < META_COLUMNS.len() || header[..META_COLUMNS.len()] != META_COLUMNS {
            return Err(MatrixError::Format(format!("header must start with {META_COLUMNS:?}")));
        }
        let columns = header[META_COLUMNS.len()..].to_vec();
        let mut meta = Vec::new();
        let mut values = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let field = |k: usize| record.get(k).filter(|s| !s.is_empty());
            let bad = |what: &str| MatrixError::Format(format!("data row {}: bad {what}", i + 1));
            let sex: Option<Sex> = parse_enum(field(1)).map_err(|_| bad("sex"))?;
            let diagnosis: Option<Diagnosis> = parse_enum(field(3)).map_err(|_| bad("diagnosis"))?;
            let class_year = field(2).map(str::parse).transpose().map_err(|_| bad("class_year"))?;
            let scores: Vec<Option<u8>> = (4..8)
                .map(|k| field(k).map(str::parse).transpose().map_err(|_| bad(META_COLUMNS[k])))
                .collect::<Result<_, _>>()?;
            let hpsqc = match scores[..] {
                [Some(l), Some(p), Some(w), Some(t)] => {
                    let h = HpsqcScore { legibility: l, performance_time: p, well_being: w, total: t };
                    h.check().map_err(|e| MatrixError::Format(e.to_string()))?;
                    Some(h)
                }
                [None, None, None, None] => None,
                _ => return Err(bad("hpsqc (partially filled)")),
            };
            meta.push(RowMeta {
                subject_id: record.get(0).unwrap_or_default().to_string(),
                sex,
                class_year,
                diagnosis,
                hpsqc,
            });
            let row = (META_COLUMNS.len()..header.len())
                .map(|k| field(k).map(str::parse::<f64>).transpose().map_err(|_| bad(&header[k])))
                .collect::<Result<Vec<_>, _>>()?;
            values.push(row);
        }
        FeatureMatrix::new(columns, meta, values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }

    pub fn from_json(raw: &str) -> Result<Self, MatrixError> {
        let m: FeatureMatrix = serde_json::from_str(raw)?;
        FeatureMatrix::new(m.columns, m.meta, m.values)
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(field: Option<&str>) -> Result<Option<T>, serde_json::Error> {
    field.map(|s| serde_json::from_value(serde_json::Value::String(s.to_string()))).transpose()
}

fn enum_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("unit enums serialize to strings"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_matrix() -> FeatureMatrix {
        let meta = vec![
            RowMeta {
                subject_id: "a".into(),
                sex: Some(Sex::Girl),
                class_year: Some(3),
                diagnosis: Some(Diagnosis::Intact),
                hpsqc: Some(HpsqcScore::new(1, 2, 3).unwrap()),
            },
            RowMeta { subject_id: "b".into(), sex: None, class_year: None, diagnosis: None, hpsqc: None },
        ];
        let values = vec![vec![Some(0.1), None, Some(-3e-12)], vec![Some(1.0 / 3.0), Some(2.0), None]];
        FeatureMatrix::new(vec!["f:global:none".into(), "g:on_surface:median".into(), "h:in_air:p95".into()], meta, values).unwrap()
    }

    #[test]
    fn csv_round_trip_preserves_values_and_missing() {
        let m = sample_matrix();
        let text = m.to_csv_string(Some("run {\"seed\": 1}"));
        assert!(text.starts_with("# run"));
        assert!(text.contains("a,girl,3,intact,1,2,3,6,0.1,,"));
        let back = FeatureMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, m);
        assert!(back.is_missing(0, 1));
    }

    #[test]
    fn json_round_trip() {
        let m = sample_matrix();
        assert_eq!(FeatureMatrix::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = FeatureMatrix::new(vec!["a".into()], vec![sample_matrix().meta[0].clone()], vec![vec![]]);
        assert!(matches!(err, Err(MatrixError::Width { .. })));
    }

    #[test]
    fn selects_and_filters_rows() {
        let m = sample_matrix();
        assert_eq!(m.select_rows(&[1]).meta()[0].subject_id, "b");
        assert_eq!(m.filter_rows(|r| r.class_year == Some(3)).n_rows(), 1);
        assert_eq!(m.column_by_name("g:on_surface:median").unwrap(), vec![None, Some(2.0)]);
        assert!(m.column_by_name("nope").is_err());
    }
}
