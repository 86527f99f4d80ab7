//! Preprocessing: string indexing, duplicate and missing-row removal,
//! min-max normalization, undersampling, train/test splitting and k-fold
//! assignment.
//!
//! All randomized steps draw from ChaCha8 seeded with `seed_from_u64`, so a
//! (table, config, seed) triple always yields the same rows on every platform.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{frequency_order, Column, ColumnData, ColumnKind, FlowTable};
use crate::error::{Error, Result};

/// String columns of the BoT-IoT flow records that get integer codes.
pub const DEFAULT_STRING_COLUMNS: [&str; 6] = ["proto", "flgs", "state", "sport", "dport", "label"];

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dictionary from the distinct strings of one column to dense codes.
/// `labels[code]` is the string for `code`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMap {
    pub column: String,
    pub labels: Vec<String>,
}

impl IndexMap {
    pub fn code(&self, value: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == value).map(|i| i as u32)
    }

    pub fn label(&self, code: u32) -> Option<&str> {
        self.labels.get(code as usize).map(String::as_str)
    }

    pub fn mapping(&self) -> BTreeMap<String, u32> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as u32))
            .collect()
    }
}

/// Categorical columns of `table` that still hold raw strings.
pub fn string_columns(table: &FlowTable) -> Vec<String> {
    table
        .columns()
        .iter()
        .filter(|c| c.kind() == ColumnKind::Categorical && matches!(c.data, ColumnData::Text(_)))
        .map(|c| c.name().to_string())
        .collect()
}

/// Replaces each named text column by integer codes, most frequent string
/// first. Codes are stored as reals so missing cells stay `NaN`.
pub fn index_strings(table: &FlowTable, columns: &[String]) -> Result<(FlowTable, Vec<IndexMap>)> {
    let mut out = table.clone();
    let mut maps = Vec::with_capacity(columns.len());
    for name in columns {
        let col = table.require(name)?;
        let values = match &col.data {
            ColumnData::Text(v) => v,
            _ => return Err(Error::Type(format!("column {name:?} does not hold strings"))),
        };
        let labels = frequency_order(values.iter().flatten().map(String::as_str));
        let lookup: HashMap<&str, u32> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();
        let codes = values
            .iter()
            .map(|v| match v {
                Some(s) => f64::from(lookup[s.as_str()]),
                None => f64::NAN,
            })
            .collect();
        out = out.with_column(Column {
            schema: col.schema.clone(),
            data: ColumnData::Numeric(codes),
        })?;
        maps.push(IndexMap {
            column: name.clone(),
            labels,
        });
    }
    Ok((out, maps))
}

/// Re-applies fitted index maps. Strings the map has not seen get the code
/// one past its last label.
pub fn apply_index_maps(table: &FlowTable, maps: &[IndexMap]) -> Result<FlowTable> {
    let mut out = table.clone();
    for map in maps {
        let col = table.require(&map.column)?;
        let values = match &col.data {
            ColumnData::Text(v) => v,
            ColumnData::Numeric(_) => continue,
            ColumnData::Codes(_) => return Err(Error::Type(format!("column {:?} does not hold strings", map.column))),
        };
        let lookup = map.mapping();
        let unseen = map.labels.len() as f64;
        let codes = values
            .iter()
            .map(|v| match v {
                Some(s) => lookup.get(s).map_or(unseen, |&c| f64::from(c)),
                None => f64::NAN,
            })
            .collect();
        out = out.with_column(Column {
            schema: col.schema.clone(),
            data: ColumnData::Numeric(codes),
        })?;
    }
    Ok(out)
}

fn hash_cell<H: Hasher>(data: &ColumnData, row: usize, h: &mut H) {
    match data {
        ColumnData::Numeric(v) => {
            let x = v[row];
            let bits = if x.is_nan() {
                u64::MAX
            } else if x == 0.0 {
                0
            } else {
                x.to_bits()
            };
            bits.hash(h);
        }
        ColumnData::Text(v) => v[row].hash(h),
        ColumnData::Codes(v) => v[row].hash(h),
    }
}

fn cells_equal(data: &ColumnData, a: usize, b: usize) -> bool {
    match data {
        ColumnData::Numeric(v) => v[a] == v[b] || (v[a].is_nan() && v[b].is_nan()),
        ColumnData::Text(v) => v[a] == v[b],
        ColumnData::Codes(v) => v[a] == v[b],
    }
}

/// Removes rows equal to an earlier row on every non-excluded column,
/// keeping first occurrences. Returns the number of rows removed.
pub fn drop_duplicates(table: &FlowTable) -> (FlowTable, usize) {
    let cols: Vec<&ColumnData> = table
        .columns()
        .iter()
        .filter(|c| c.kind() != ColumnKind::Excluded)
        .map(|c| &c.data)
        .collect();
    let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut keep = Vec::with_capacity(table.row_count());
    for row in 0..table.row_count() {
        let mut h = DefaultHasher::new();
        for c in &cols {
            hash_cell(c, row, &mut h);
        }
        let bucket = buckets.entry(h.finish()).or_default();
        let dup = bucket
            .iter()
            .any(|&prev| cols.iter().all(|c| cells_equal(c, prev, row)));
        if !dup {
            bucket.push(row);
            keep.push(row);
        }
    }
    let removed = table.row_count() - keep.len();
    (table.take(&keep), removed)
}

/// Rows dropped for missing values, grouped by class name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MissingReport(pub BTreeMap<String, u64>);

impl MissingReport {
    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn get(&self, class: &str) -> u64 {
        self.0.get(class).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Deletes every row holding a missing marker in a non-excluded column.
pub fn drop_missing(table: &FlowTable) -> (FlowTable, MissingReport) {
    let classes = table.row_class_names();
    let mut report = MissingReport::default();
    let mut keep = Vec::with_capacity(table.row_count());
    for (row, class) in classes.iter().enumerate() {
        if table.row_has_missing(row) {
            *report.0.entry(class.clone()).or_default() += 1;
        } else {
            keep.push(row);
        }
    }
    if keep.is_empty() && table.row_count() > 0 {
        log::warn!("every one of {} rows had missing values", table.row_count());
    }
    (table.take(&keep), report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub column: String,
    pub min: f64,
    pub max: f64,
}

/// Fitted per-column min/max pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub columns: Vec<ColumnRange>,
}

impl NormalizationParams {
    pub fn get(&self, column: &str) -> Option<&ColumnRange> {
        self.columns.iter().find(|c| c.column == column)
    }

    /// Scales a single value into [0,1]; constant columns map to 0.
    pub fn scale(range: &ColumnRange, v: f64) -> f64 {
        if range.max <= range.min || v.is_nan() {
            return if v.is_nan() { v } else { 0.0 };
        }
        ((v - range.min) / (range.max - range.min)).clamp(0.0, 1.0)
    }
}

fn numeric_values<'a>(table: &'a FlowTable, name: &str) -> Result<&'a [f64]> {
    match &table.require(name)?.data {
        ColumnData::Numeric(v) => Ok(v),
        _ => Err(Error::Type(format!("column {name:?} is not numeric"))),
    }
}

/// Min-max scales `columns` into [0,1]. With `params` the given ranges are
/// applied (values clamped); without, ranges are fitted on this table.
pub fn min_max_normalize(
    table: &FlowTable,
    columns: &[String],
    params: Option<&NormalizationParams>,
) -> Result<(FlowTable, NormalizationParams)> {
    let mut out = table.clone();
    let mut fitted = Vec::with_capacity(columns.len());
    for name in columns {
        let values = numeric_values(table, name)?;
        let range = match params {
            Some(p) => p
                .get(name)
                .cloned()
                .ok_or_else(|| Error::Schema(format!("no normalization range for {name:?}")))?,
            None => {
                let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
                for &v in values.iter().filter(|v| !v.is_nan()) {
                    min = min.min(v);
                    max = max.max(v);
                }
                if min > max {
                    min = 0.0;
                    max = 0.0;
                }
                ColumnRange {
                    column: name.clone(),
                    min,
                    max,
                }
            }
        };
        let scaled = values
            .iter()
            .map(|&v| NormalizationParams::scale(&range, v))
            .collect();
        let col = table.require(name)?;
        out = out.with_column(Column {
            schema: col.schema.clone(),
            data: ColumnData::Numeric(scaled),
        })?;
        fitted.push(range);
    }
    Ok((out, NormalizationParams { columns: fitted }))
}

/// Per-class keep ratios for undersampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub ratios: BTreeMap<String, f64>,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(ratios: BTreeMap<String, f64>, seed: u64) -> Result<Self> {
        let plan = SamplingPlan { ratios, seed };
        plan.validate()?;
        Ok(plan)
    }

    /// Keeps at most `cap` rows of every class.
    pub fn capped(counts: &BTreeMap<String, u64>, cap: u64, seed: u64) -> Self {
        let ratios = counts
            .iter()
            .map(|(c, &n)| {
                let r = if n == 0 || n <= cap { 1.0 } else { cap as f64 / n as f64 };
                (c.clone(), r)
            })
            .collect();
        SamplingPlan { ratios, seed }
    }

    pub fn keep_all<I: IntoIterator<Item = String>>(classes: I, seed: u64) -> Self {
        SamplingPlan {
            ratios: classes.into_iter().map(|c| (c, 1.0)).collect(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (class, &r) in &self.ratios {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Config(format!(
                    "keep ratio {r} for class {class:?} is outside (0,1]"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: SamplingPlan = serde_json::from_str(&text)?;
        plan.validate()?;
        Ok(plan)
    }
}

fn rows_by_class(classes: &[String]) -> BTreeMap<&str, Vec<usize>> {
    let mut by: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (row, c) in classes.iter().enumerate() {
        by.entry(c.as_str()).or_default().push(row);
    }
    by
}

/// Moves a uniformly chosen `k`-subset of `rows` to its front
/// (partial Fisher-Yates).
fn choose_prefix(rows: &mut [usize], k: usize, rng: &mut ChaCha8Rng) {
    let n = rows.len();
    for i in 0..k.min(n) {
        let j = rng.gen_range(i..n);
        rows.swap(i, j);
    }
}

/// `round(fraction * n)`, half away from zero. The product is snapped to a
/// 1e-9 grid first so 0.7 * 5 rounds to 4 despite 0.7 being stored low.
fn round_count(fraction: f64, n: usize) -> usize {
    let x = ((fraction * n as f64) * 1e9).round() / 1e9;
    (x.round() as usize).min(n)
}

/// Keeps `round(ratio * n_c)` rows of each class, where the class of a row
/// is given by `classes`. Retained rows keep their original order.
pub fn undersample_by(table: &FlowTable, classes: &[String], plan: &SamplingPlan) -> Result<FlowTable> {
    plan.validate()?;
    let mut rng = rng(plan.seed);
    let mut keep = Vec::new();
    for (class, mut rows) in rows_by_class(classes) {
        let ratio = *plan
            .ratios
            .get(class)
            .ok_or_else(|| Error::Config(format!("sampling plan has no ratio for class {class:?}")))?;
        let k = round_count(ratio, rows.len());
        choose_prefix(&mut rows, k, &mut rng);
        keep.extend_from_slice(&rows[..k]);
    }
    keep.sort_unstable();
    Ok(table.take(&keep))
}

/// Undersamples by the table's per-row class names (the subcategory class
/// when available).
pub fn undersample(table: &FlowTable, plan: &SamplingPlan) -> Result<FlowTable> {
    undersample_by(table, &table.row_class_names(), plan)
}

/// Stratification key per row: the target code when labels are derived,
/// otherwise the row class name.
fn strata(table: &FlowTable) -> Vec<String> {
    match table.target() {
        Ok(codes) => codes.iter().map(|c| format!("{c:010}")).collect(),
        Err(_) => table.row_class_names(),
    }
}

/// Splits rows into train and test sets. Stratified mode rounds each class
/// separately. Both sides are always non-empty.
pub fn split_train_test(
    table: &FlowTable,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(FlowTable, FlowTable)> {
    let n = table.row_count();
    if n < 2 {
        return Err(Error::Data(format!("cannot split a table of {n} rows")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} not in (0,1)")));
    }
    let mut rng = rng(seed);
    let groups: Vec<Vec<usize>> = if stratified {
        rows_by_class(&strata(table)).into_values().collect()
    } else {
        vec![(0..n).collect()]
    };
    let mut train_parts: Vec<Vec<usize>> = Vec::new();
    let mut test_parts: Vec<Vec<usize>> = Vec::new();
    for mut rows in groups {
        let k = round_count(train_fraction, rows.len());
        choose_prefix(&mut rows, k, &mut rng);
        test_parts.push(rows.split_off(k));
        train_parts.push(rows);
    }
    let largest = |parts: &[Vec<usize>]| {
        (0..parts.len())
            .max_by(|&a, &b| parts[a].len().cmp(&parts[b].len()).then(b.cmp(&a)))
            .expect("at least one group")
    };
    if test_parts.iter().all(Vec::is_empty) {
        let g = largest(&train_parts);
        let row = train_parts[g].pop().expect("largest group is non-empty");
        test_parts[g].push(row);
    } else if train_parts.iter().all(Vec::is_empty) {
        let g = largest(&test_parts);
        let row = test_parts[g].pop().expect("largest group is non-empty");
        train_parts[g].push(row);
    }
    let mut train: Vec<usize> = train_parts.concat();
    let mut test: Vec<usize> = test_parts.concat();
    train.sort_unstable();
    test.sort_unstable();
    Ok((table.take(&train), table.take(&test)))
}

/// Fold index for every row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: Vec<u32>,
}

impl FoldAssignment {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        self.rows_where(|f| f == fold)
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        self.rows_where(|f| f != fold)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f as usize] += 1;
        }
        sizes
    }

    fn rows_where(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(_, &f)| pred(f as usize))
            .map(|(r, _)| r)
            .collect()
    }
}

/// Assigns rows to `k` folds round-robin over a seeded shuffle. Stratified
/// mode shuffles within each class and continues the round-robin across
/// classes, so every class and every fold is balanced within one row.
pub fn make_folds(table: &FlowTable, k: usize, seed: u64, stratified: bool) -> Result<FoldAssignment> {
    let n = table.row_count();
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Data(format!("k={k} exceeds row count {n}")));
    }
    let mut rng = rng(seed);
    let groups: Vec<Vec<usize>> = if stratified {
        rows_by_class(&strata(table)).into_values().collect()
    } else {
        vec![(0..n).collect()]
    };
    let mut folds = vec![0u32; n];
    let mut next = 0usize;
    for mut rows in groups {
        let len = rows.len();
        choose_prefix(&mut rows, len, &mut rng);
        for row in rows {
            folds[row] = (next % k) as u32;
            next += 1;
        }
    }
    Ok(FoldAssignment { k, folds })
}
