//! Sparse classification datasets in LIBSVM text format.
//!
//! Grammar, one row per line: `label idx:val idx:val ...` with 1-based,
//! strictly increasing feature indices. Blank lines are skipped. Labels are
//! normalized to ±1 at load time.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    /// 0-based, strictly increasing.
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Self {
        Self { indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    pub name: String,
    pub rows: Vec<SparseRow>,
    /// Each label is −1 or +1.
    pub labels: Vec<i8>,
    /// One past the largest feature index.
    pub dim: usize,
}

impl SparseDataset {
    /// Validates the row invariants; `dim` is inferred from the largest index.
    pub fn new(name: impl Into<String>, rows: Vec<SparseRow>, labels: Vec<i8>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::usage("dataset has no rows"));
        }
        if rows.len() != labels.len() {
            return Err(Error::usage("row and label counts differ"));
        }
        if labels.iter().any(|&z| z != 1 && z != -1) {
            return Err(Error::usage("labels must be -1 or +1"));
        }
        let mut dim = 0usize;
        for (r, row) in rows.iter().enumerate() {
            if row.indices.len() != row.values.len() {
                return Err(Error::usage(format!("row {r}: index/value length mismatch")));
            }
            if row.indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::usage(format!("row {r}: indices not strictly increasing")));
            }
            if let Some(&last) = row.indices.last() {
                dim = dim.max(last as usize + 1);
            }
        }
        Ok(Self {
            name: name.into(),
            rows,
            labels,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Widens `dim`, e.g. so a test split shares the training dimension.
    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = self.dim.max(dim);
        self
    }

    fn subset(&self, name: String, order: &[usize]) -> SparseDataset {
        SparseDataset {
            name,
            rows: order.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: order.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
        }
    }
}

pub fn parse_sparse_file(path: impl AsRef<Path>) -> Result<SparseDataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_sparse_reader(BufReader::new(file), path, name)
}

/// Streaming parser; `origin` only labels error messages.
pub fn parse_sparse_reader<R: BufRead>(reader: R, origin: &Path, name: String) -> Result<SparseDataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut rows = Vec::new();
    let mut raw_labels: Vec<f64> = Vec::new();
    let mut dim = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(lineno, format!("bad label {label_tok:?}")))?;
        if !label.is_finite() {
            return Err(err(lineno, format!("bad label {label_tok:?}")));
        }
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected idx:val, got {tok:?}")))?;
            let idx: u32 = idx
                .parse()
                .map_err(|_| err(lineno, format!("bad feature index {idx:?}")))?;
            if idx == 0 {
                return Err(err(lineno, "feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(lineno, format!("bad feature value {val:?}")))?;
            let idx = idx - 1;
            if indices.last().is_some_and(|&prev| prev >= idx) {
                return Err(err(lineno, "feature indices not strictly increasing".into()));
            }
            indices.push(idx);
            values.push(val);
        }
        if let Some(&last) = indices.last() {
            dim = dim.max(last as usize + 1);
        }
        rows.push(SparseRow { indices, values });
        raw_labels.push(label);
    }
    if rows.is_empty() {
        return Err(err(0, "empty file".into()));
    }
    let labels = normalize_labels(&raw_labels).map_err(|m| err(0, m))?;
    Ok(SparseDataset {
        name,
        rows,
        labels,
        dim,
    })
}

/// Maps a two-valued label column to ±1, smaller value to −1.
fn normalize_labels(raw: &[f64]) -> std::result::Result<Vec<i8>, String> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in raw {
        if !distinct.contains(&v) {
            distinct.push(v);
            if distinct.len() > 2 {
                return Err(format!("more than two label values: {distinct:?}"));
            }
        }
    }
    distinct.sort_by(|a, b| a.total_cmp(b));
    let already_signed = distinct.iter().all(|&v| v == 1.0 || v == -1.0);
    Ok(raw
        .iter()
        .map(|&v| {
            if already_signed {
                v as i8
            } else if distinct.len() == 1 {
                if v > 0.0 {
                    1
                } else {
                    -1
                }
            } else if v == distinct[0] {
                -1
            } else {
                1
            }
        })
        .collect())
}

/// Writes the dataset so that [`parse_sparse_file`] reads it back unchanged.
pub fn write_sparse<W: Write>(data: &SparseDataset, mut out: W) -> Result<()> {
    for (row, &z) in data.rows.iter().zip(&data.labels) {
        write!(out, "{}", if z > 0 { "+1" } else { "-1" })?;
        for (&j, &v) in row.indices.iter().zip(&row.values) {
            // `{:?}` is the shortest representation that round-trips exactly.
            write!(out, " {}:{:?}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

/// Seeded shuffle, then the first `⌈fraction·n⌉` rows train and the rest test.
pub fn split(data: &SparseDataset, spec: SplitSpec) -> Result<(SparseDataset, SparseDataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::usage(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let n = data.len();
    let n_train = (spec.train_fraction * n as f64).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::usage(format!(
            "train fraction {} leaves an empty side for {n} rows",
            spec.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut crate::seeded_rng(spec.seed));
    let train = data.subset(format!("{}-train", data.name), &order[..n_train]);
    let test = data.subset(format!("{}-test", data.name), &order[n_train..]);
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetInfo {
    pub name: &'static str,
    pub train_points: usize,
    pub test_points: usize,
    pub features: usize,
    /// Too large for dense per-sample gradient storage on a workstation.
    pub large: bool,
}

/// Shapes of the public binary classification sets used for logistic benchmarks.
pub fn registry() -> Vec<DatasetInfo> {
    let info = |name, train_points, test_points, features, large| DatasetInfo {
        name,
        train_points,
        test_points,
        features,
        large,
    };
    vec![
        info("gisette", 6_000, 1_000, 5_000, false),
        info("mushrooms", 7_311, 813, 112, false),
        info("sido", 11_410, 1_268, 4_932, false),
        info("ijcnn", 35_000, 91_701, 22, false),
        info("spam", 82_970, 9_219, 823_470, true),
        info("alpha", 450_000, 50_000, 500, true),
        info("covertype", 522_910, 58_102, 54, false),
        info("url", 2_156_517, 239_613, 3_231_961, true),
    ]
}

pub fn lookup(name: &str) -> Option<DatasetInfo> {
    let lower = name.to_ascii_lowercase();
    registry().into_iter().find(|d| lower.starts_with(d.name))
}

/// Shape mismatches against the registry. Advisory: callers log these, never fail.
pub fn check_against_registry(data: &SparseDataset) -> Vec<String> {
    let Some(info) = lookup(&data.name) else {
        return Vec::new();
    };
    let mut warnings = Vec::new();
    let total = info.train_points + info.test_points;
    if data.len() != total && data.len() != info.train_points && data.len() != info.test_points {
        warnings.push(format!(
            "{}: {} rows, registry lists ({}; {})",
            info.name,
            data.len(),
            info.train_points,
            info.test_points
        ));
    }
    if data.dim > info.features {
        warnings.push(format!(
            "{}: {} features, registry lists {}",
            info.name, data.dim, info.features
        ));
    }
    if info.large {
        warnings.push(format!("{}: marked large; expect heavy memory use", info.name));
    }
    warnings
}

/// Linearly separable binary data resembling one-hot categorical sets: the
/// features split into `min(d, 22)` contiguous groups and every row activates
/// one unit feature per group. The label is the sign of a hidden weight
/// vector's score (ties broken toward +1).
pub fn synthetic_logistic<R: Rng>(n: usize, d: usize, rng: &mut R) -> Result<SparseDataset> {
    if n == 0 || d == 0 {
        return Err(Error::usage("synthetic logistic needs n > 0 and d > 0"));
    }
    let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let groups = d.min(22);
    let bounds: Vec<usize> = (0..=groups).map(|g| g * d / groups).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let idx: Vec<u32> = bounds.windows(2).map(|b| rng.gen_range(b[0]..b[1]) as u32).collect();
        let score: f64 = idx.iter().map(|&j| w[j as usize]).sum();
        labels.push(if score >= 0.0 { 1 } else { -1 });
        rows.push(SparseRow::new(idx, vec![1.0; groups]));
    }
    Ok(SparseDataset::new(format!("synthetic-{n}x{d}"), rows, labels)?.with_dim(d))
}
