//! Datasets and how they enter and leave the workbench.
//!
//! A [`Dataset`] is a dense feature matrix plus binary labels (1 = the rare
//! positive class), optional per-row transaction amounts, and stable row ids.
//! Ids survive splitting and resampling, which is what makes the leakage and
//! parentage audits possible downstream: a trained model can name exactly the
//! rows it saw.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Dense row-major matrix of f64 features.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix shape mismatch");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * cols);
        for r in &rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { rows: n, cols, data }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row width mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: indices.len(), cols: self.cols, data }
    }
}

/// Stable row identity. Source rows keep their 0-based position in the file
/// they were loaded from (or the generator's emission order); rows added by a
/// resampler get fresh ids tagged as synthetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RowId {
    Source(u64),
    Synthetic(u64),
}

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowId::Source(i) => write!(f, "s{i}"),
            RowId::Synthetic(i) => write!(f, "y{i}"),
        }
    }
}

impl RowId {
    pub fn is_synthetic(&self) -> bool {
        matches!(self, RowId::Synthetic(_))
    }
}

/// Feature matrix + labels + optional amounts + row ids + feature names.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub amounts: Option<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub row_ids: Vec<RowId>,
}

impl Dataset {
    /// Checked constructor: aligned lengths, 0/1 labels, unique row ids.
    pub fn new(
        features: Matrix,
        labels: Vec<u8>,
        amounts: Option<Vec<f64>>,
        feature_names: Vec<String>,
        row_ids: Vec<RowId>,
    ) -> Result<Self> {
        let n = features.n_rows();
        if labels.len() != n || row_ids.len() != n {
            return Err(Error::Internal(format!(
                "dataset alignment: {} rows, {} labels, {} ids",
                n,
                labels.len(),
                row_ids.len()
            )));
        }
        if let Some(a) = &amounts {
            if a.len() != n {
                return Err(Error::Internal(format!(
                    "dataset alignment: {} rows, {} amounts",
                    n,
                    a.len()
                )));
            }
        }
        if feature_names.len() != features.n_cols() {
            return Err(Error::Internal(format!(
                "dataset alignment: {} feature columns, {} names",
                features.n_cols(),
                feature_names.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Internal(format!("label {bad} outside {{0, 1}}")));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &row_ids {
            if !seen.insert(*id) {
                return Err(Error::Internal(format!("duplicate row id {id}")));
            }
        }
        Ok(Dataset { features, labels, amounts, feature_names, row_ids })
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    /// Indices of (majority=0, minority=1) rows, in row order.
    pub fn class_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let mut majority = Vec::new();
        let mut minority = Vec::new();
        for (i, &l) in self.labels.iter().enumerate() {
            if l == 1 {
                minority.push(i);
            } else {
                majority.push(i);
            }
        }
        (majority, minority)
    }

    /// New dataset holding the given rows (ids preserved), in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            amounts: self
                .amounts
                .as_ref()
                .map(|a| indices.iter().map(|&i| a[i]).collect()),
            feature_names: self.feature_names.clone(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }
}

/// Class balance summary. `ir` is the minority share of all rows, so perfectly
/// balanced data sits at 0.5 and the fraud regime lives near zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceStats {
    pub n_majority: usize,
    pub n_minority: usize,
    pub ir: f64,
}

pub fn imbalance_stats(data: &Dataset) -> Result<ImbalanceStats> {
    if data.n_rows() == 0 {
        return Err(Error::EmptyData("cannot summarize an empty dataset".into()));
    }
    let n_minority = data.labels.iter().filter(|&&l| l == 1).count();
    let n_majority = data.n_rows() - n_minority;
    Ok(ImbalanceStats {
        n_majority,
        n_minority,
        ir: n_minority as f64 / data.n_rows() as f64,
    })
}

/// A stratified train/test split, tagged with how it was drawn.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub test_fraction: f64,
    pub seed: u64,
}

/// Split per class: each class contributes round(test_fraction × class size)
/// rows to the test side, drawn by seeded shuffle, so the class ratio survives
/// the split. Both partitions keep source row order.
pub fn stratified_split(data: &Dataset, test_fraction: f64, seed_value: u64) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let (majority, minority) = data.class_indices();
    for (label, class) in [(0u8, &majority), (1u8, &minority)] {
        if class.len() < 2 {
            return Err(Error::ClassTooSmall { label, count: class.len(), required: 2 });
        }
    }

    let mut rng = seed::rng(seed_value);
    let mut test_idx = Vec::new();
    let mut train_idx = Vec::new();
    // Majority first, then minority: the draw order is part of the contract
    // (reordering would re-seed every downstream experiment).
    for class in [&majority, &minority] {
        let take = (test_fraction * class.len() as f64).round() as usize;
        if take == 0 || take == class.len() {
            return Err(Error::InvalidParam(format!(
                "test_fraction {test_fraction} leaves an empty partition for a class of {} rows",
                class.len()
            )));
        }
        let mut shuffled = class.to_vec();
        shuffled.shuffle(&mut rng);
        test_idx.extend_from_slice(&shuffled[..take]);
        train_idx.extend_from_slice(&shuffled[take..]);
    }
    test_idx.sort_unstable();
    train_idx.sort_unstable();

    Ok(SplitPair {
        train: data.subset(&train_idx),
        test: data.subset(&test_idx),
        test_fraction,
        seed: seed_value,
    })
}

// ---------------------------------------------------------------------------
// CSV I/O
// ---------------------------------------------------------------------------

/// Loader knobs. `amount_column = Some(name)` requires that column to exist;
/// `None` loads without amounts. Custom label tokens cover files that spell
/// the classes e.g. "genuine"/"fraud" instead of 0/1.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label_column: String,
    pub amount_column: Option<String>,
    pub negative_token: String,
    pub positive_token: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            label_column: "Class".into(),
            amount_column: None,
            negative_token: "0".into(),
            positive_token: "1".into(),
        }
    }
}

/// Read a UTF-8, comma-separated, headered CSV into a [`Dataset`].
///
/// Every column other than the label and (optional) amount column is a
/// feature and must parse as a finite real. Row ids are the 0-based data-row
/// positions. A single-class file loads fine (with a warning) — resamplers
/// and learners reject it later with their own errors.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if headers.is_empty() {
        return Err(Error::EmptyData(format!("{} has no header row", path.display())));
    }

    let label_idx = headers
        .iter()
        .position(|h| *h == opts.label_column)
        .ok_or_else(|| Error::MissingColumn(opts.label_column.clone()))?;
    let amount_idx = match &opts.amount_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?,
        ),
        None => None,
    };

    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && Some(i) != amount_idx)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::EmptyData(format!("{} has no feature columns", path.display())));
    }
    let feature_names: Vec<String> = feature_cols.iter().map(|&i| headers[i].clone()).collect();

    let mut features = Matrix::zeros(0, feature_cols.len());
    let mut labels = Vec::new();
    let mut amounts = amount_idx.map(|_| Vec::new());
    let mut buf = vec![0.0; feature_cols.len()];

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Csv(format!(
                "row {row}: {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        let parse = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            match raw.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonNumericCell {
                    row,
                    column: headers[col].clone(),
                    value: raw.to_string(),
                }),
            }
        };
        for (slot, &col) in buf.iter_mut().zip(&feature_cols) {
            *slot = parse(col)?;
        }
        features.push_row(&buf);

        let raw_label = record.get(label_idx).unwrap_or("").trim();
        let label = if raw_label == opts.negative_token {
            0
        } else if raw_label == opts.positive_token {
            1
        } else {
            return Err(Error::BadLabel {
                row,
                column: opts.label_column.clone(),
                value: raw_label.to_string(),
                expected: format!("{:?} or {:?}", opts.negative_token, opts.positive_token),
            });
        };
        labels.push(label);

        if let (Some(col), Some(vec)) = (amount_idx, amounts.as_mut()) {
            let v = parse(col)?;
            if v < 0.0 {
                return Err(Error::NegativeAmount { amount: v, row });
            }
            vec.push(v);
        }
    }

    if labels.is_empty() {
        return Err(Error::EmptyData(format!("{} has no data rows", path.display())));
    }
    let minority = labels.iter().filter(|&&l| l == 1).count();
    if minority == 0 || minority == labels.len() {
        log::warn!(
            "{}: label column {:?} holds a single class; resampling and fitting will be rejected",
            path.display(),
            opts.label_column
        );
    }

    let row_ids = (0..labels.len() as u64).map(RowId::Source).collect();
    Dataset::new(features, labels, amounts, feature_names, row_ids)
}

/// 17 significant digits: enough for f64 values to survive a write/read cycle
/// bit-exactly.
pub fn format_g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a dataset as CSV: features in order, then "Amount" (when present),
/// then the label under "Class". Floats carry 17 significant digits.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_path(path)?;
    let mut header: Vec<String> = data.feature_names.clone();
    if data.amounts.is_some() {
        header.push("Amount".into());
    }
    header.push("Class".into());
    writer.write_record(&header)?;

    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..data.n_rows() {
        record.clear();
        record.extend(data.features.row(i).iter().map(|&v| format_g17(v)));
        if let Some(a) = &data.amounts {
            record.push(format_g17(a[i]));
        }
        record.push(data.labels[i].to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Generate a two-Gaussian-blob dataset for desk-scale experiments.
///
/// Majority rows sit at the origin with unit variance; minority rows are
/// shifted along feature 0 by `8·(1 − overlap)` standard deviations, so
/// `overlap = 0` is separable by a single threshold and `overlap = 1` makes
/// the classes indistinguishable. The minority count is exactly
/// `round(ir · n)`. Amounts are log-normal, like real transaction values.
pub fn synthesize_dataset(
    n: usize,
    ir: f64,
    dims: usize,
    overlap: f64,
    seed_value: u64,
) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::InvalidParam(format!("n must be at least 10, got {n}")));
    }
    if !(ir > 0.0 && ir < 0.5) {
        return Err(Error::InvalidParam(format!(
            "ir must lie in (0, 0.5) — the minority must actually be a minority, got {ir}"
        )));
    }
    if dims < 2 {
        return Err(Error::InvalidParam(format!("dims must be at least 2, got {dims}")));
    }
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::InvalidParam(format!("overlap must lie in [0, 1], got {overlap}")));
    }
    let n_minority = (ir * n as f64).round() as usize;
    if n_minority == 0 {
        return Err(Error::InvalidParam(format!(
            "ir {ir} rounds to zero minority rows at n = {n}"
        )));
    }

    let mut rng = seed::rng(seed_value);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let amount_dist = LogNormal::new(3.0, 1.0).expect("log-normal");
    let separation = 8.0 * (1.0 - overlap);

    let mut features = Matrix::zeros(0, dims);
    let mut labels = Vec::with_capacity(n);
    let mut amounts = Vec::with_capacity(n);
    let mut buf = vec![0.0; dims];
    for i in 0..n {
        let is_minority = i < n_minority;
        for (j, slot) in buf.iter_mut().enumerate() {
            let shift = if is_minority && j == 0 { separation } else { 0.0 };
            *slot = noise.sample(&mut rng) + shift;
        }
        features.push_row(&buf);
        labels.push(u8::from(is_minority));
        amounts.push(amount_dist.sample(&mut rng));
    }

    let feature_names = (0..dims).map(|j| format!("f{j}")).collect();
    let row_ids = (0..n as u64).map(RowId::Source).collect();
    Dataset::new(features, labels, Some(amounts), feature_names, row_ids)
}

/// Quick synthetic dataset for tests: no amounts knob, fixed defaults.
#[cfg(test)]
pub(crate) fn test_blobs(n: usize, ir: f64, dims: usize, seed_value: u64) -> Dataset {
    synthesize_dataset(n, ir, dims, 0.1, seed_value).expect("test blobs")
}
