//! Datasets, CSV ingestion, synthetic generators, and the row/feature
//! sampling schemes (bootstrap, patches, feature subspaces) that feed tree
//! training.
//!
//! Feature values are stored column-major so per-feature scans (histogram
//! insertion, min/max, threshold counting) stream through contiguous memory.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Regression,
}

/// Target storage. Classification labels are dense `0..K-1` indices in
/// first-appearance order; the original label strings are not retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Classes { labels: Vec<u32>, n_classes: usize },
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Values(values) => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Targets::Classes { .. } => TaskKind::Classification,
            Targets::Values(_) => TaskKind::Regression,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n_rows: usize,
    n_features: usize,
    /// Column-major: feature `j` occupies `values[j*n_rows..(j+1)*n_rows]`.
    values: Vec<f64>,
    targets: Targets,
    feature_names: Vec<String>,
    label_name: String,
}

impl Dataset {
    /// Build a dataset from per-feature columns. All columns must share one
    /// length, every value must be finite, and classification labels must
    /// lie in `0..n_classes`.
    pub fn from_columns(
        columns: Vec<Vec<f64>>,
        targets: Targets,
        feature_names: Option<Vec<String>>,
        label_name: impl Into<String>,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidParam("dataset needs at least one feature".into()));
        }
        let n_rows = columns[0].len();
        if n_rows == 0 {
            return Err(Error::InvalidParam("dataset needs at least one row".into()));
        }
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::InvalidParam("feature columns have unequal lengths".into()));
        }
        if targets.len() != n_rows {
            return Err(Error::InvalidParam(format!(
                "target length {} does not match {} rows",
                targets.len(),
                n_rows
            )));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("non-finite feature value".into()));
        }
        match &targets {
            Targets::Classes { labels, n_classes } => {
                if labels.iter().any(|&l| (l as usize) >= *n_classes) {
                    return Err(Error::InvalidParam("class label out of range".into()));
                }
            }
            Targets::Values(values) => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParam("non-finite target value".into()));
                }
            }
        }
        let n_features = columns.len();
        let feature_names = match feature_names {
            Some(names) => {
                if names.len() != n_features {
                    return Err(Error::InvalidParam("feature name count mismatch".into()));
                }
                names
            }
            None => (0..n_features).map(|j| format!("x{j}")).collect(),
        };
        let mut values = Vec::with_capacity(n_rows * n_features);
        for column in &columns {
            values.extend_from_slice(column);
        }
        Ok(Dataset {
            n_rows,
            n_features,
            values,
            targets,
            feature_names,
            label_name: label_name.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn task(&self) -> TaskKind {
        self.targets.task()
    }

    pub fn n_classes(&self) -> Option<usize> {
        match &self.targets {
            Targets::Classes { n_classes, .. } => Some(*n_classes),
            Targets::Values(_) => None,
        }
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.values[feature * self.n_rows + row]
    }

    pub fn column(&self, feature: usize) -> &[f64] {
        &self.values[feature * self.n_rows..(feature + 1) * self.n_rows]
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Dense class labels, `None` for regression.
    pub fn labels(&self) -> Option<&[u32]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            Targets::Values(_) => None,
        }
    }

    /// Real-valued targets, `None` for classification.
    pub fn target_values(&self) -> Option<&[f64]> {
        match &self.targets {
            Targets::Values(values) => Some(values),
            Targets::Classes { .. } => None,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    /// Copy of the rows at `rows` (duplicates allowed), same features and
    /// label mapping as the parent.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::InvalidParam("empty row subset".into()));
        }
        if rows.iter().any(|&r| r >= self.n_rows) {
            return Err(Error::InvalidParam("row index out of bounds".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * self.n_features);
        for feature in 0..self.n_features {
            let column = self.column(feature);
            values.extend(rows.iter().map(|&r| column[r]));
        }
        let targets = match &self.targets {
            Targets::Classes { labels, n_classes } => Targets::Classes {
                labels: rows.iter().map(|&r| labels[r]).collect(),
                n_classes: *n_classes,
            },
            Targets::Values(v) => Targets::Values(rows.iter().map(|&r| v[r]).collect()),
        };
        Ok(Dataset {
            n_rows: rows.len(),
            n_features: self.n_features,
            values,
            targets,
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
        })
    }

    /// Write as CSV with a header row. Floats use Rust's shortest
    /// round-trip formatting, so reloading reproduces values exactly;
    /// classification labels are written as their dense indices.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        let mut header: Vec<&str> = self.feature_names.iter().map(|s| s.as_str()).collect();
        header.push(&self.label_name);
        w.write_record(&header)?;
        let mut record: Vec<String> = Vec::with_capacity(self.n_features + 1);
        for row in 0..self.n_rows {
            record.clear();
            for feature in 0..self.n_features {
                record.push(format!("{}", self.value(row, feature)));
            }
            match &self.targets {
                Targets::Classes { labels, .. } => record.push(format!("{}", labels[row])),
                Targets::Values(v) => record.push(format!("{}", v[row])),
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Label column selector for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// A bare unsigned integer selects by position, anything else by name.
    pub fn parse(s: &str) -> LabelColumn {
        match s.trim().parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.trim().to_string()),
        }
    }
}

/// Load a CSV with one header row. The label column is removed from the
/// features; classification labels are mapped to dense `0..K-1` indices in
/// first-appearance order. Any non-numeric or non-finite feature cell is a
/// hard error.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, task: TaskKind) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let label_idx = match label {
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::LabelColumnNotFound(name.clone()))?,
        LabelColumn::Index(i) => {
            if *i >= headers.len() {
                return Err(Error::LabelColumnNotFound(i.to_string()));
            }
            *i
        }
    };
    if headers.len() < 2 {
        return Err(Error::InvalidParam("csv needs at least one feature column".into()));
    }

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    let label_name = headers[label_idx].trim().to_string();
    let n_features = feature_names.len();

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_features];
    let mut class_ids: HashMap<String, u32> = HashMap::new();
    let mut class_labels: Vec<u32> = Vec::new();
    let mut reg_targets: Vec<f64> = Vec::new();

    for (record_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv { record: record_no + 1, msg: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                record: record_no + 1,
                msg: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut slot = 0;
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                match task {
                    TaskKind::Classification => {
                        let key = cell.trim().to_string();
                        let next = class_ids.len() as u32;
                        let id = *class_ids.entry(key).or_insert(next);
                        class_labels.push(id);
                    }
                    TaskKind::Regression => {
                        let y = parse_cell(cell, record_no + 1, &headers[j])?;
                        reg_targets.push(y);
                    }
                }
            } else {
                let v = parse_cell(cell, record_no + 1, &headers[j])?;
                columns[slot].push(v);
                slot += 1;
            }
        }
    }

    if columns[0].is_empty() {
        return Err(Error::InvalidParam("csv has a header but no data rows".into()));
    }
    let targets = match task {
        TaskKind::Classification => Targets::Classes {
            labels: class_labels,
            n_classes: class_ids.len(),
        },
        TaskKind::Regression => Targets::Values(reg_targets),
    };
    Dataset::from_columns(columns, targets, Some(feature_names), label_name)
}

fn parse_cell(cell: &str, record: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Csv {
        record,
        msg: format!("non-numeric cell {cell:?} in column {column:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Csv {
            record,
            msg: format!("non-finite cell {cell:?} in column {column:?}"),
        });
    }
    Ok(v)
}

/// Split rows into disjoint (train, test) datasets; the test side gets
/// `ceil(N * test_fraction)` rows. Deterministic per seed.
pub fn train_test_split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = d.n_rows();
    let test_n = (n as f64 * test_fraction).ceil() as usize;
    if test_n == 0 || test_n >= n {
        return Err(Error::InvalidParam(format!(
            "split of {n} rows at fraction {test_fraction} leaves an empty side"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = seeding::rng(seed);
    for i in 0..n - 1 {
        let j = rng.random_range(i..n);
        perm.swap(i, j);
    }
    let mut test_rows = perm[..test_n].to_vec();
    let mut train_rows = perm[test_n..].to_vec();
    test_rows.sort_unstable();
    train_rows.sort_unstable();
    Ok((d.subset(&train_rows)?, d.subset(&test_rows)?))
}

/// A node's worth of data: row indices (repeats allowed, e.g. bootstrap)
/// and distinct feature indices into a shared dataset.
#[derive(Debug, Clone)]
pub struct NodeView<'a> {
    data: &'a Dataset,
    rows: Vec<usize>,
    features: Vec<usize>,
}

impl<'a> NodeView<'a> {
    pub fn new(data: &'a Dataset, rows: Vec<usize>, features: Vec<usize>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParam("node view needs at least one row".into()));
        }
        if rows.iter().any(|&r| r >= data.n_rows()) {
            return Err(Error::InvalidParam("node row index out of bounds".into()));
        }
        if features.is_empty() {
            return Err(Error::InvalidParam("node view needs at least one feature".into()));
        }
        if features.iter().any(|&f| f >= data.n_features()) {
            return Err(Error::InvalidParam("node feature index out of bounds".into()));
        }
        let mut sorted = features.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParam("node feature indices must be distinct".into()));
        }
        Ok(NodeView { data, rows, features })
    }

    /// Every row and every feature of the dataset.
    pub fn full(data: &'a Dataset) -> Self {
        NodeView {
            data,
            rows: (0..data.n_rows()).collect(),
            features: (0..data.n_features()).collect(),
        }
    }

    /// The given rows with every feature.
    pub fn with_rows(data: &'a Dataset, rows: Vec<usize>) -> Result<Self> {
        NodeView::new(data, rows, (0..data.n_features()).collect())
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    /// Value of the `slot`-th node feature at the `pos`-th node row.
    #[inline]
    pub fn value(&self, pos: usize, slot: usize) -> f64 {
        self.data.value(self.rows[pos], self.features[slot])
    }
}

/// Bootstrap: N row draws with replacement, all features.
pub fn bootstrap_sample<'a>(d: &'a Dataset, seed: u64) -> NodeView<'a> {
    let n = d.n_rows();
    let mut rng = seeding::rng(seed);
    let rows = (0..n).map(|_| rng.random_range(0..n)).collect();
    NodeView {
        data: d,
        rows,
        features: (0..d.n_features()).collect(),
    }
}

/// One fixed row/feature subsample: `floor(alpha_n * N)` rows and
/// `floor(alpha_f * M)` features, both without replacement.
pub fn patch_subsample<'a>(
    d: &'a Dataset,
    alpha_n: f64,
    alpha_f: f64,
    seed: u64,
) -> Result<NodeView<'a>> {
    for (name, a) in [("alpha_n", alpha_n), ("alpha_f", alpha_f)] {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidParam(format!("{name} must be in (0, 1], got {a}")));
        }
    }
    let n_rows = (alpha_n * d.n_rows() as f64).floor() as usize;
    let n_features = (alpha_f * d.n_features() as f64).floor() as usize;
    if n_rows == 0 {
        return Err(Error::InvalidParam("patch has zero rows after flooring".into()));
    }
    if n_features == 0 {
        return Err(Error::InvalidParam("patch has zero features after flooring".into()));
    }
    let mut rng = seeding::rng(seed);
    let mut rows = sample_without_replacement(d.n_rows(), n_rows, &mut rng);
    let mut features = sample_without_replacement(d.n_features(), n_features, &mut rng);
    rows.sort_unstable();
    features.sort_unstable();
    NodeView::new(d, rows, features)
}

/// `count` distinct feature indices drawn uniformly from the node's
/// feature set, returned sorted.
pub fn feature_subspace(node: &NodeView, count: usize, seed: u64) -> Result<Vec<usize>> {
    let m = node.features().len();
    if count == 0 || count > m {
        return Err(Error::InvalidParam(format!(
            "feature subspace count {count} out of range 1..={m}"
        )));
    }
    let mut rng = seeding::rng(seed);
    let picks = sample_without_replacement(m, count, &mut rng);
    let mut chosen: Vec<usize> = picks.into_iter().map(|i| node.features()[i]).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// First `count` entries of a seeded Fisher-Yates shuffle of `0..n`.
fn sample_without_replacement(n: usize, count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Classification,
    Regression,
}

/// Random linear model: i.i.d. standard normal features; the first
/// `n_informative` columns get coefficients drawn uniform in [1, 10]; the
/// target score is their linear combination plus `noise_scale` times a
/// standard normal. Regression keeps the score; classification labels rows
/// by thresholding the score at its median, giving balanced classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n_samples == 0 {
        return Err(Error::InvalidParam("n_samples must be at least 1".into()));
    }
    if spec.n_features == 0 {
        return Err(Error::InvalidParam("n_features must be at least 1".into()));
    }
    if spec.n_informative > spec.n_features {
        return Err(Error::InvalidParam(format!(
            "n_informative {} exceeds n_features {}",
            spec.n_informative, spec.n_features
        )));
    }
    if !(spec.noise_scale >= 0.0 && spec.noise_scale.is_finite()) {
        return Err(Error::InvalidParam("noise_scale must be finite and >= 0".into()));
    }
    if spec.kind == SyntheticKind::Classification
        && spec.n_informative == 0
        && spec.noise_scale == 0.0
    {
        return Err(Error::InvalidParam(
            "classification needs an informative feature or noise to vary the score".into(),
        ));
    }

    let n = spec.n_samples;
    let m = spec.n_features;
    let normal = StandardNormal;

    let mut rng_x = seeding::rng(seeding::derive(spec.seed, 0));
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(m);
    for _ in 0..m {
        columns.push((0..n).map(|_| normal.sample(&mut rng_x)).collect());
    }

    let mut rng_coef = seeding::rng(seeding::derive(spec.seed, 1));
    let coefs: Vec<f64> = (0..spec.n_informative)
        .map(|_| 1.0 + 9.0 * rng_coef.random::<f64>())
        .collect();

    let mut rng_noise = seeding::rng(seeding::derive(spec.seed, 2));
    let mut scores = vec![0.0f64; n];
    for (j, coef) in coefs.iter().enumerate() {
        for (s, &x) in scores.iter_mut().zip(&columns[j]) {
            *s += coef * x;
        }
    }
    for s in scores.iter_mut() {
        let eps: f64 = normal.sample(&mut rng_noise);
        *s += spec.noise_scale * eps;
    }

    let targets = match spec.kind {
        SyntheticKind::Regression => Targets::Values(scores),
        SyntheticKind::Classification => {
            let mut sorted = scores.clone();
            sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let median = if n % 2 == 0 {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            } else {
                sorted[n / 2]
            };
            // first-appearance relabeling keeps generated datasets in the
            // same canonical form load_csv produces
            let raw: Vec<bool> = scores.iter().map(|&s| s > median).collect();
            let first = raw[0];
            let labels: Vec<u32> = raw.iter().map(|&above| (above != first) as u32).collect();
            let n_classes = if labels.iter().any(|&l| l == 1) { 2 } else { 1 };
            Targets::Classes { labels, n_classes }
        }
    };

    Dataset::from_columns(columns, targets, None, "y")
}
