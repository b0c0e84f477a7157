use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SplitSpec;
use crate::error::{Error, Result};
use crate::model::TaskKind;

/// Maps CSV columns to roles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub timestamp: String,
    pub features: Vec<String>,
    pub labels: Vec<String>,
    pub kind: TaskKind,
    /// Columns present in the files but not used.
    #[serde(default)]
    pub ignore: Vec<String>,
}

impl Schema {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(file).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }
}

/// Per-feature standardization statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Mean and population standard deviation over `rows` (row-major,
    /// `features` wide). Zero deviations are replaced by one.
    pub fn fit(rows: &[f64], features: usize) -> Self {
        let n = rows.len() / features.max(1);
        let mut mean = vec![0.0; features];
        let mut std = vec![1.0; features];
        if n == 0 {
            return Normalizer { mean, std };
        }
        for r in 0..n {
            for d in 0..features {
                mean[d] += rows[r * features + d];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for d in 0..features {
            let mut var = 0.0;
            for r in 0..n {
                let z = rows[r * features + d] - mean[d];
                var += z * z;
            }
            let s = (var / n as f64).sqrt();
            std[d] = if s > 0.0 { s } else { 1.0 };
        }
        Normalizer { mean, std }
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

/// Timestamp-sorted rows of one task, with missing features imputed.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub task_id: String,
    pub kind: TaskKind,
    pub timestamps: Vec<String>,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    /// `rows × features`, row-major.
    pub features: Vec<f64>,
    /// `rows × labels`, row-major.
    pub labels: Vec<f64>,
    /// Leading rows that form the training split.
    pub train_rows: usize,
}

impl RawTable {
    pub fn rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn feature_row(&self, r: usize) -> &[f64] {
        let d = self.feature_names.len();
        &self.features[r * d..(r + 1) * d]
    }

    pub fn label_row(&self, r: usize) -> &[f64] {
        let m = self.label_names.len();
        &self.labels[r * m..(r + 1) * m]
    }

    /// Standardization statistics of the training rows.
    pub fn normalizer(&self) -> Normalizer {
        let d = self.feature_names.len();
        Normalizer::fit(&self.features[..self.train_rows * d], d)
    }
}

enum SortKey {
    Numeric(Vec<f64>),
    Text,
}

fn parse_cell(cell: &str) -> Option<Result<f64, String>> {
    let trimmed = cell.trim();
    if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("nan") {
        return None;
    }
    Some(trimmed.parse::<f64>().map_err(|_| trimmed.to_string()))
}

/// Reads one task CSV.
///
/// Rows are sorted by timestamp (numerically when every timestamp parses
/// as a number, lexicographically otherwise). Rows with a missing label are
/// dropped; missing feature cells are filled with the feature's mean over the
/// training split of the remaining rows.
pub fn load_task_csv(path: &Path, schema: &Schema, split: &SplitSpec) -> Result<RawTable> {
    split.validate()?;
    let task_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{}: {other:?}", path.display())),
        })?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let index: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();

    let mut known: Vec<&str> = vec![schema.timestamp.as_str()];
    known.extend(schema.features.iter().map(String::as_str));
    known.extend(schema.labels.iter().map(String::as_str));
    known.extend(schema.ignore.iter().map(String::as_str));
    for col in &known {
        if !index.contains_key(col) {
            return Err(Error::Schema(format!("{}: column `{col}` not in header", path.display())));
        }
    }
    if let Some(extra) = header.iter().find(|h| !known.contains(&h.as_str())) {
        return Err(Error::Schema(format!(
            "{}: unknown column `{extra}` (list it under `ignore` to skip it)",
            path.display()
        )));
    }
    if schema.features.is_empty() || schema.labels.is_empty() {
        return Err(Error::Schema("schema needs at least one feature and one label".into()));
    }

    let ts_col = index[schema.timestamp.as_str()];
    let feat_cols: Vec<usize> = schema.features.iter().map(|c| index[c.as_str()]).collect();
    let label_cols: Vec<usize> = schema.labels.iter().map(|c| index[c.as_str()]).collect();

    struct Row {
        ts: String,
        features: Vec<Option<f64>>,
        labels: Vec<f64>,
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |c: usize, what: &str| -> Result<Option<f64>> {
            match parse_cell(record.get(c).unwrap_or("")) {
                None => Ok(None),
                Some(Ok(v)) => Ok(Some(v)),
                Some(Err(raw)) => Err(Error::Data(format!(
                    "{} line {}: {what} `{}` is not numeric: `{raw}`",
                    path.display(),
                    line + 2,
                    header[c]
                ))),
            }
        };
        let labels = label_cols
            .iter()
            .map(|&c| cell(c, "label"))
            .collect::<Result<Vec<_>>>()?;
        if labels.iter().any(Option::is_none) {
            continue;
        }
        let features = feat_cols
            .iter()
            .map(|&c| cell(c, "feature"))
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row {
            ts: record.get(ts_col).unwrap_or("").trim().to_string(),
            features,
            labels: labels.into_iter().flatten().collect(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: dataset is empty", path.display())));
    }

    let key = match rows.iter().map(|r| r.ts.parse::<f64>()).collect::<Result<Vec<_>, _>>() {
        Ok(v) if v.iter().all(|x| x.is_finite()) => SortKey::Numeric(v),
        _ => SortKey::Text,
    };
    let mut order: Vec<usize> = (0..rows.len()).collect();
    match &key {
        SortKey::Numeric(v) => order.sort_by(|&a, &b| v[a].total_cmp(&v[b])),
        SortKey::Text => order.sort_by(|&a, &b| rows[a].ts.cmp(&rows[b].ts)),
    }
    let same = |a: usize, b: usize| match &key {
        SortKey::Numeric(v) => v[a] == v[b],
        SortKey::Text => rows[a].ts == rows[b].ts,
    };
    let mut duplicates: Vec<String> = order
        .windows(2)
        .filter(|w| same(w[0], w[1]))
        .map(|w| rows[w[1]].ts.clone())
        .collect();
    duplicates.dedup();
    if !duplicates.is_empty() {
        return Err(Error::Data(format!(
            "{}: duplicate timestamps {:?}",
            path.display(),
            duplicates
        )));
    }

    let d = feat_cols.len();
    let (train_rows, _, _) = split.sizes(order.len());
    let mut means = vec![0.0; d];
    for (j, mean) in means.iter_mut().enumerate() {
        let seen: Vec<f64> = order[..train_rows].iter().filter_map(|&r| rows[r].features[j]).collect();
        if seen.is_empty() {
            log::warn!("{}: feature `{}` has no training values, imputing 0", path.display(), schema.features[j]);
        } else {
            *mean = seen.iter().sum::<f64>() / seen.len() as f64;
        }
    }

    let mut table = RawTable {
        task_id,
        kind: schema.kind,
        timestamps: Vec::with_capacity(order.len()),
        feature_names: schema.features.clone(),
        label_names: schema.labels.clone(),
        features: Vec::with_capacity(order.len() * d),
        labels: Vec::with_capacity(order.len() * label_cols.len()),
        train_rows,
    };
    for &r in &order {
        let row = &rows[r];
        table.timestamps.push(row.ts.clone());
        table
            .features
            .extend(row.features.iter().zip(&means).map(|(v, m)| v.unwrap_or(*m)));
        table.labels.extend_from_slice(&row.labels);
    }
    if table.kind == TaskKind::Classification {
        if let Some(bad) = table.labels.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::Data(format!(
                "{}: classification label {bad} is not 0 or 1",
                path.display()
            )));
        }
    }
    Ok(table)
}
