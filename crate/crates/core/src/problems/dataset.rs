use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LogisticRegressionProblem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    Standardize,
}

/// Column roles of a CSV dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    #[serde(default)]
    pub has_header: bool,
    pub label_column: usize,
    /// Feature columns; every non-label column when absent.
    #[serde(default)]
    pub feature_columns: Option<Vec<usize>>,
    #[serde(default)]
    pub normalization: Normalization,
    /// Label value treated as class 1 for one-vs-rest reduction. Without it
    /// labels must already be `{0, 1}` or `{−1, +1}`.
    #[serde(default)]
    pub positive_class: Option<String>,
    #[serde(default)]
    pub l2_reg: f64,
    #[serde(default = "default_bias")]
    pub includes_bias: bool,
}

fn default_bias() -> bool {
    true
}

impl DatasetSchema {
    pub fn new(label_column: usize) -> Self {
        Self {
            has_header: false,
            label_column,
            feature_columns: None,
            normalization: Normalization::None,
            positive_class: None,
            l2_reg: 0.0,
            includes_bias: true,
        }
    }
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| Error::Dataset { row, msg: format!("column {col}: non-numeric cell {cell:?}") })?;
    if !v.is_finite() {
        return Err(Error::Dataset { row, msg: format!("column {col}: non-finite value") });
    }
    Ok(v)
}

fn map_labels(raw: &[(usize, String)], positive: Option<&str>) -> Result<Vec<f64>> {
    if let Some(pos) = positive {
        let pos = pos.trim();
        return Ok(raw.iter().map(|(_, s)| if s.trim() == pos { 1.0 } else { 0.0 }).collect());
    }
    let mut values = Vec::with_capacity(raw.len());
    for (row, s) in raw {
        values.push(parse_cell(s, *row, 0)?);
    }
    if values.iter().all(|&v| v == 0.0 || v == 1.0) {
        return Ok(values);
    }
    if values.iter().all(|&v| v == -1.0 || v == 1.0) {
        return Ok(values.into_iter().map(|v| if v > 0.0 { 1.0 } else { 0.0 }).collect());
    }
    let bad = raw
        .iter()
        .zip(&values)
        .find(|(_, &v)| v != 0.0 && v != 1.0 && v != -1.0)
        .map(|((row, _), _)| *row)
        .unwrap_or(raw[0].0);
    Err(Error::Dataset {
        row: bad,
        msg: "labels are not binary; set positive_class for a one-vs-rest reduction".into(),
    })
}

/// Per-feature standardisation to mean 0, variance 1. Constant columns are
/// only centred. Returns `(mean, std)` per feature.
pub(crate) fn standardize(features: &mut [f64], n_features: usize) -> Vec<(f64, f64)> {
    let n = features.len() / n_features;
    (0..n_features)
        .map(|j| {
            let mean = (0..n).map(|i| features[i * n_features + j]).sum::<f64>() / n as f64;
            let var = (0..n).map(|i| (features[i * n_features + j] - mean).powi(2)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            for i in 0..n {
                let x = &mut features[i * n_features + j];
                *x -= mean;
                if std > 0.0 {
                    *x /= std;
                }
            }
            (mean, std)
        })
        .collect()
}

/// Reads a CSV file into a logistic-regression problem. Row numbers in
/// errors are 1-based file lines.
pub fn load_csv_dataset(path: &Path, schema: &DatasetSchema) -> Result<LogisticRegressionProblem> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .from_path(path)?;
    let mut width = None;
    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut n_features = 0;
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec.position().map_or(k + 1, |p| p.line() as usize);
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Dataset { row, msg: format!("expected {w} columns, found {}", rec.len()) });
        }
        if schema.label_column >= w {
            return Err(Error::Dataset { row, msg: format!("label column {} out of range", schema.label_column) });
        }
        let cols: Vec<usize> = match &schema.feature_columns {
            Some(c) => c.clone(),
            None => (0..w).filter(|&c| c != schema.label_column).collect(),
        };
        if let Some(&c) = cols.iter().find(|&&c| c >= w) {
            return Err(Error::Dataset { row, msg: format!("feature column {c} out of range") });
        }
        n_features = cols.len();
        for c in cols {
            features.push(parse_cell(&rec[c], row, c)?);
        }
        raw_labels.push((row, rec[schema.label_column].to_string()));
    }
    if raw_labels.is_empty() {
        return Err(Error::Dataset { row: 0, msg: "no data rows".into() });
    }
    let labels = map_labels(&raw_labels, schema.positive_class.as_deref())?;
    if schema.normalization == Normalization::Standardize {
        standardize(&mut features, n_features);
    }
    LogisticRegressionProblem::new(features, n_features, labels, schema.l2_reg, schema.includes_bias)
}
