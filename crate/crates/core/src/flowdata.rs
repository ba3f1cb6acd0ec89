//! Flow tables: CSV loading, sanitizing, label encoding, MinMax scaling and
//! train/test partitioning.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Identifier columns removed before modelling.
pub const DEFAULT_DROP_COLUMNS: [&str; 5] = [
    "Unnamed: 0",
    "Flow ID",
    "Timestamp",
    "Source IP",
    "Destination IP",
];

/// Header names accepted as the class column.
pub const LABEL_COLUMN_CANDIDATES: [&str; 2] = ["Class", "Label"];

const BENIGN_NAMES: [&str; 5] = ["benign", "normal", "legitimate", "clean", "0"];
const KEYLOGGER_NAMES: [&str; 5] = ["keylogger", "malicious", "malware", "attack", "1"];

/// Case-, whitespace- and underscore-insensitive column key.
pub fn normalize_column_name(name: &str) -> String {
    name.chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

/// Numeric feature matrix (row-major) plus binary labels and feature names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTable {
    feature_names: Vec<String>,
    features: Vec<f64>,
    labels: Vec<u8>,
    n_rows: usize,
    n_features: usize,
}

impl FlowTable {
    /// Builds a table, checking shape, label range and name uniqueness.
    pub fn new(feature_names: Vec<String>, features: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let n_features = feature_names.len();
        let n_rows = labels.len();
        if features.len() != n_rows * n_features {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_features,
                found: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidConfig(format!("label {bad} is not 0 or 1")));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate feature name {name:?}"
                )));
            }
        }
        Ok(Self {
            feature_names,
            features,
            labels,
            n_rows,
            n_features,
        })
    }

    /// Table from row vectors; names default to `f0, f1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[u8]) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for row in rows {
            if row.len() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    found: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        let names = (0..n_features).map(|j| format!("f{j}")).collect();
        Self::new(names, features, labels.to_vec())
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics; a zero-width table still has n_rows empty rows.
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |i| self.features[i * self.n_features + j])
    }

    /// Row counts per class `[benign, keylogger]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.n_rows - ones, ones]
    }

    /// New table holding `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> FlowTable {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        FlowTable {
            feature_names: self.feature_names.clone(),
            features,
            labels,
            n_rows: indices.len(),
            n_features: self.n_features,
        }
    }

    /// New table restricted to `columns`, preserving row order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<FlowTable> {
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.n_features) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                n_features: self.n_features,
            });
        }
        let mut features = Vec::with_capacity(self.n_rows * columns.len());
        for row in self.rows() {
            features.extend(columns.iter().map(|&j| row[j]));
        }
        let names = columns
            .iter()
            .map(|&j| self.feature_names[j].clone())
            .collect();
        FlowTable::new(names, features, self.labels.clone())
    }

    /// Appends rows; used by resampling.
    pub(crate) fn extend_rows(&mut self, features: &[f64], labels: &[u8]) {
        debug_assert_eq!(features.len(), labels.len() * self.n_features);
        self.features.extend_from_slice(features);
        self.labels.extend_from_slice(labels);
        self.n_rows += labels.len();
    }

    /// Index of a feature by (normalized) name.
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        let key = normalize_column_name(name);
        self.feature_names
            .iter()
            .position(|n| normalize_column_name(n) == key)
    }

    /// Writes the lossless binary cache (`KLFTBL01`).
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(32 + self.features.len() * 8 + self.n_rows);
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&(self.n_rows as u64).to_le_bytes());
        buf.extend_from_slice(&(self.n_features as u64).to_le_bytes());
        for name in &self.feature_names {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
        }
        for v in &self.features {
            buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        buf.extend_from_slice(&self.labels);
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    /// Reads a cache written by [`FlowTable::write_cache`].
    pub fn read_cache(path: &Path) -> Result<FlowTable> {
        let mut buf = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        let mut cur = Cursor { buf: &buf, pos: 0 };
        if cur.take(8)? != CACHE_MAGIC {
            return Err(Error::Corrupt("bad table cache magic".into()));
        }
        let n_rows = cur.u64()? as usize;
        let n_features = cur.u64()? as usize;
        let mut names = Vec::with_capacity(n_features);
        for _ in 0..n_features {
            let len = cur.u32()? as usize;
            let s = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| Error::Corrupt("feature name is not UTF-8".into()))?;
            names.push(s.to_owned());
        }
        let mut features = Vec::with_capacity(n_rows * n_features);
        for _ in 0..n_rows * n_features {
            features.push(f64::from_bits(cur.u64()?));
        }
        let labels = cur.take(n_rows)?.to_vec();
        if cur.pos != buf.len() {
            return Err(Error::Corrupt("trailing bytes in table cache".into()));
        }
        FlowTable::new(names, features, labels)
    }
}

const CACHE_MAGIC: &[u8; 8] = b"KLFTBL01";

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Corrupt("unexpected end of table cache".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Mapping from observed class strings to codes (benign 0, keylogger 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEncoding {
    pub classes: BTreeMap<String, u8>,
}

impl LabelEncoding {
    /// Builds the bijection over the distinct class strings.
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut distinct: Vec<String> = values
            .into_iter()
            .map(|v| v.trim().to_owned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        if distinct.len() > 2 {
            return Err(Error::TooManyClasses { classes: distinct });
        }
        let known = |s: &str| {
            let l = s.to_lowercase();
            if BENIGN_NAMES.contains(&l.as_str()) {
                Some(0u8)
            } else if KEYLOGGER_NAMES.contains(&l.as_str()) {
                Some(1u8)
            } else {
                None
            }
        };
        let mut classes = BTreeMap::new();
        match distinct.as_slice() {
            [] => {}
            [only] => {
                classes.insert(only.clone(), known(only).unwrap_or(0));
            }
            [a, b] => {
                let (ca, cb) = match (known(a), known(b)) {
                    (Some(x), Some(y)) => (x, y),
                    (Some(x), None) => (x, 1 - x),
                    (None, Some(y)) => (1 - y, y),
                    // Unrecognized names: lexicographic order.
                    (None, None) => (0, 1),
                };
                if ca == cb {
                    distinct.sort();
                    return Err(Error::TooManyClasses { classes: distinct });
                }
                classes.insert(a.clone(), ca);
                classes.insert(b.clone(), cb);
            }
            _ => unreachable!(),
        }
        Ok(Self { classes })
    }

    pub fn encode(&self, value: &str) -> Option<u8> {
        self.classes.get(value.trim()).copied()
    }

    pub fn decode(&self, code: u8) -> Option<&str> {
        self.classes
            .iter()
            .find(|(_, &c)| c == code)
            .map(|(s, _)| s.as_str())
    }
}

/// Counts of cells rewritten by the sanitize pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitizeReport {
    pub positive_infinity: usize,
    pub negative_infinity: usize,
    pub nan_or_missing: usize,
    pub non_numeric: usize,
}

impl SanitizeReport {
    pub fn total(&self) -> usize {
        self.positive_infinity + self.negative_infinity + self.nan_or_missing + self.non_numeric
    }
}

/// Options controlling [`load_csv_with`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub drop_columns: Vec<String>,
    /// Explicit label column; `None` searches [`LABEL_COLUMN_CANDIDATES`].
    pub label_column: Option<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            drop_columns: DEFAULT_DROP_COLUMNS.iter().map(|s| s.to_string()).collect(),
            label_column: None,
        }
    }
}

/// Everything learned while loading a CSV.
#[derive(Debug, Clone)]
pub struct LoadedTable {
    pub table: FlowTable,
    pub encoding: LabelEncoding,
    pub sanitize: SanitizeReport,
    pub label_column: String,
    pub dropped_columns: Vec<String>,
}

/// Loads a flow CSV with the given identifier columns dropped.
pub fn load_csv(path: &Path, drop_columns: &[String]) -> Result<FlowTable> {
    let options = LoadOptions {
        drop_columns: drop_columns.to_vec(),
        label_column: None,
    };
    Ok(load_csv_with(path, &options)?.table)
}

pub fn load_csv_with(path: &Path, options: &LoadOptions) -> Result<LoadedTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyFile {
            path: path.to_owned(),
        });
    }

    let label_keys: Vec<String> = match &options.label_column {
        Some(name) => vec![normalize_column_name(name)],
        None => LABEL_COLUMN_CANDIDATES
            .iter()
            .map(|c| normalize_column_name(c))
            .collect(),
    };
    let label_idx = label_keys
        .iter()
        .find_map(|key| headers.iter().position(|h| normalize_column_name(h) == *key))
        .ok_or_else(|| Error::MissingLabelColumn {
            candidates: match &options.label_column {
                Some(name) => vec![name.clone()],
                None => LABEL_COLUMN_CANDIDATES.iter().map(|s| s.to_string()).collect(),
            },
        })?;

    let drop_keys: Vec<String> = options
        .drop_columns
        .iter()
        .map(|c| normalize_column_name(c))
        .collect();
    let mut dropped = Vec::new();
    let mut keep = Vec::new();
    for (j, h) in headers.iter().enumerate() {
        if j == label_idx {
            continue;
        }
        if drop_keys.contains(&normalize_column_name(h)) {
            dropped.push(h.clone());
        } else {
            keep.push(j);
        }
    }

    let n_features = keep.len();
    let mut raw: Vec<f64> = Vec::new();
    let mut classes: Vec<String> = Vec::new();
    let mut report = SanitizeReport::default();
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while reader.read_record(&mut record)? {
        row += 1;
        if record.len() == 1 && record.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if record.len() != headers.len() {
            return Err(Error::MalformedRow {
                row,
                column: record.len().min(headers.len()),
                reason: format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            });
        }
        for &j in &keep {
            raw.push(parse_cell(&record[j], &mut report));
        }
        classes.push(record[label_idx].trim().to_owned());
    }
    if classes.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_owned(),
        });
    }

    let encoding = LabelEncoding::fit(classes.iter().map(String::as_str))?;
    let labels: Vec<u8> = classes
        .iter()
        .map(|c| encoding.encode(c).expect("encoding covers every observed class"))
        .collect();

    let names = keep.iter().map(|&j| headers[j].clone()).collect::<Vec<_>>();
    let mut table = FlowTable::new(names, raw, labels)?;
    sanitize_in_place(&mut table);
    if report.total() > 0 {
        log::warn!(
            "sanitized {} cells (+inf {}, -inf {}, NaN/missing {}, non-numeric {})",
            report.total(),
            report.positive_infinity,
            report.negative_infinity,
            report.nan_or_missing,
            report.non_numeric
        );
    }
    log::info!(
        "loaded {} rows x {} features from {} (dropped {:?})",
        table.n_rows(),
        n_features,
        path.display(),
        dropped
    );
    Ok(LoadedTable {
        table,
        encoding,
        sanitize: report,
        label_column: headers[label_idx].clone(),
        dropped_columns: dropped,
    })
}

fn parse_cell(cell: &str, report: &mut SanitizeReport) -> f64 {
    let s = cell.trim();
    if s.is_empty() {
        report.nan_or_missing += 1;
        return f64::NAN;
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_nan() => {
            report.nan_or_missing += 1;
            v
        }
        Ok(v) if v == f64::INFINITY => {
            report.positive_infinity += 1;
            v
        }
        Ok(v) if v == f64::NEG_INFINITY => {
            report.negative_infinity += 1;
            v
        }
        Ok(v) => v,
        Err(_) => {
            report.non_numeric += 1;
            f64::NAN
        }
    }
}

/// Replaces +inf by the column's finite max, -inf by its finite min and NaN
/// by its finite median. A column with no finite value becomes all zeros.
pub fn sanitize(table: &FlowTable) -> FlowTable {
    let mut out = table.clone();
    sanitize_in_place(&mut out);
    out
}

fn sanitize_in_place(table: &mut FlowTable) {
    let (n, m) = (table.n_rows, table.n_features);
    for j in 0..m {
        if (0..n).all(|i| table.features[i * m + j].is_finite()) {
            continue;
        }
        let mut finite: Vec<f64> = (0..n)
            .map(|i| table.features[i * m + j])
            .filter(|v| v.is_finite())
            .collect();
        let (lo, hi, median) = if finite.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            finite.sort_by(f64::total_cmp);
            (finite[0], finite[finite.len() - 1], median_sorted(&finite))
        };
        for i in 0..n {
            let v = &mut table.features[i * m + j];
            if v.is_nan() {
                *v = median;
            } else if *v == f64::INFINITY {
                *v = hi;
            } else if *v == f64::NEG_INFINITY {
                *v = lo;
            }
        }
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-feature MinMax parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    /// Scales one row in place with the clamp policy.
    pub fn transform_row(&self, row: &mut [f64]) {
        for ((v, &lo), &hi) in row.iter_mut().zip(&self.min).zip(&self.max) {
            let range = hi - lo;
            *v = if range > 0.0 {
                ((*v - lo) / range).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }

    /// Maps scaled values back to the original range.
    pub fn inverse_row(&self, row: &mut [f64]) {
        for ((v, &lo), &hi) in row.iter_mut().zip(&self.min).zip(&self.max) {
            *v = *v * (hi - lo) + lo;
        }
    }

    pub fn select(&self, columns: &[usize]) -> ScalerParams {
        ScalerParams {
            min: columns.iter().map(|&j| self.min[j]).collect(),
            max: columns.iter().map(|&j| self.max[j]).collect(),
        }
    }
}

pub fn fit_minmax(table: &FlowTable) -> Result<ScalerParams> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let m = table.n_features();
    let mut min = vec![f64::INFINITY; m];
    let mut max = vec![f64::NEG_INFINITY; m];
    for row in table.rows() {
        for j in 0..m {
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    Ok(ScalerParams { min, max })
}

pub fn apply_minmax(table: &FlowTable, params: &ScalerParams) -> Result<FlowTable> {
    if params.n_features() != table.n_features() {
        return Err(Error::DimensionMismatch {
            expected: table.n_features(),
            found: params.n_features(),
        });
    }
    let mut out = table.clone();
    let m = table.n_features();
    if m > 0 {
        for row in out.features.chunks_exact_mut(m) {
            params.transform_row(row);
        }
    }
    Ok(out)
}

/// How to partition a table into train and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 42,
            stratified: true,
        }
    }
}

/// Train and test row indices, each in ascending order.
pub fn split_indices(labels: &[u8], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction {} not in (0,1)",
            spec.train_fraction
        )));
    }
    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut g = vec![Vec::new(), Vec::new()];
        for (i, &l) in labels.iter().enumerate() {
            g[l as usize].push(i);
        }
        for (c, members) in g.iter().enumerate() {
            if members.len() < 2 {
                return Err(Error::InsufficientRows(format!(
                    "class {c} has {} rows; a stratified split needs at least 2",
                    members.len()
                )));
            }
        }
        g
    } else {
        if labels.len() < 2 {
            return Err(Error::InsufficientRows(format!(
                "{} rows; a split needs at least 2",
                labels.len()
            )));
        }
        vec![(0..labels.len()).collect()]
    };

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (g, mut members) in groups.into_iter().enumerate() {
        let mut rng = rng::stream(spec.seed, Purpose::Split, g as u64);
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = ((n as f64 * spec.train_fraction).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split(table: &FlowTable, spec: &SplitSpec) -> Result<(FlowTable, FlowTable)> {
    let (train, test) = split_indices(table.labels(), spec)?;
    Ok((table.subset(&train), table.subset(&test)))
}

/// Stratified fold id for every row.
///
/// Within each class, rows are ordered by a hash of `(seed, row index)` and
/// dealt round-robin, so per-class fold sizes differ by at most one.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let mut fold = vec![0usize; labels.len()];
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::FoldTooSmall(format!(
                "class {class} has {} rows for {k} folds",
                members.len()
            )));
        }
        members.sort_by_key(|&i| (rng::hash3(seed, Purpose::Folds, i as u64), i));
        for (pos, &i) in members.iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    Ok(fold)
}

/// Per-feature, per-class descriptive statistics as CSV.
pub fn summary_csv(table: &FlowTable) -> String {
    let mut out = String::from("feature,class,count,mean,std,min,q1,median,q3,max\n");
    for (j, name) in table.feature_names().iter().enumerate() {
        for class in 0..2u8 {
            let mut v: Vec<f64> = table
                .column(j)
                .zip(table.labels())
                .filter(|(_, &l)| l == class)
                .map(|(x, _)| x)
                .collect();
            if v.is_empty() {
                continue;
            }
            v.sort_by(f64::total_cmp);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let q = |p: f64| {
                let pos = p * (v.len() - 1) as f64;
                let lo = pos.floor() as usize;
                let hi = pos.ceil() as usize;
                v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                csv_escape(name),
                class,
                v.len(),
                mean,
                var.sqrt(),
                v[0],
                q(0.25),
                q(0.5),
                q(0.75),
                v[v.len() - 1]
            ));
        }
    }
    out
}

pub(crate) fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
