//! Columnar flow tables, column schemas and label derivation.
//!
//! A [`FlowTable`] is immutable once built. Every transform in the crate
//! returns a fresh table. Numeric cells use `NaN` as the missing marker and
//! text cells use `None`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the integer class column appended by [`derive_labels`].
pub const TARGET_COLUMN: &str = "target";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    LabelBinary,
    LabelCategory,
    LabelSubcategory,
    Excluded,
    /// Integer class codes produced by label derivation.
    Target,
}

impl ColumnKind {
    pub fn is_label(self) -> bool {
        matches!(
            self,
            ColumnKind::LabelBinary
                | ColumnKind::LabelCategory
                | ColumnKind::LabelSubcategory
                | ColumnKind::Target
        )
    }

    /// Whether the column is a candidate model input.
    pub fn is_feature(self) -> bool {
        matches!(self, ColumnKind::Numeric | ColumnKind::Categorical)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Informational; missing cells are recorded regardless and removed by
    /// `drop_missing`.
    #[serde(default)]
    pub nullable: bool,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnSchema {
            name: name.into(),
            kind,
            nullable: false,
        }
    }
}

/// Ordered list of column definitions for raw flow files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    columns: Vec<ColumnSchema>,
}

const BOT_IOT_SCHEMA: &str = include_str!("../schemas/bot_iot.json");
const BOT_IOT_5PCT_SCHEMA: &str = include_str!("../schemas/bot_iot_5pct.json");

impl Schema {
    /// Builds a schema for raw label-bearing data. Names must be unique, there
    /// must be exactly one binary label column and at most one category and
    /// subcategory column.
    pub fn new(columns: Vec<ColumnSchema>) -> Result<Self> {
        check_unique(columns.iter().map(|c| c.name.as_str()))?;
        let count = |kind| columns.iter().filter(|c| c.kind == kind).count();
        if count(ColumnKind::LabelBinary) != 1 {
            return Err(Error::Schema(format!(
                "schema needs exactly one label-binary column, found {}",
                count(ColumnKind::LabelBinary)
            )));
        }
        for kind in [ColumnKind::LabelCategory, ColumnKind::LabelSubcategory] {
            if count(kind) > 1 {
                return Err(Error::Schema(format!(
                    "at most one {kind:?} column allowed"
                )));
            }
        }
        if count(ColumnKind::Target) > 0 {
            return Err(Error::Schema(
                "target columns are derived, not declared".to_string(),
            ));
        }
        Ok(Schema { columns })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let columns: Vec<ColumnSchema> = serde_json::from_str(s)?;
        Schema::new(columns)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Schema::from_json_str(&text)
    }

    /// Schema of the 35-column BoT-IoT full-dataset shards.
    pub fn bot_iot() -> Self {
        Schema::from_json_str(BOT_IOT_SCHEMA).expect("bundled schema is valid")
    }

    /// Schema of the published BoT-IoT 5% extract.
    pub fn bot_iot_5pct() -> Self {
        Schema::from_json_str(BOT_IOT_5PCT_SCHEMA).expect("bundled schema is valid")
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

fn check_unique<'a>(names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for name in names {
        if !seen.insert(name) {
            return Err(Error::Schema(format!("duplicate column name {name:?}")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    /// `NaN` marks a missing cell.
    Numeric(Vec<f64>),
    /// `None` marks a missing cell.
    Text(Vec<Option<String>>),
    Codes(Vec<u32>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Text(v) => v.len(),
            ColumnData::Codes(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Numeric(v) => v[row].is_nan(),
            ColumnData::Text(v) => v[row].is_none(),
            ColumnData::Codes(_) => false,
        }
    }

    /// Numeric view of a cell. Text cells have no numeric value.
    pub fn value(&self, row: usize) -> Option<f64> {
        match self {
            ColumnData::Numeric(v) => Some(v[row]),
            ColumnData::Codes(v) => Some(f64::from(v[row])),
            ColumnData::Text(_) => None,
        }
    }

    pub(crate) fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Text(v) => ColumnData::Text(rows.iter().map(|&r| v[r].clone()).collect()),
            ColumnData::Codes(v) => ColumnData::Codes(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    /// Cell rendered for CSV output; missing cells render empty.
    pub fn render(&self, row: usize) -> String {
        match self {
            ColumnData::Numeric(v) if v[row].is_nan() => String::new(),
            ColumnData::Numeric(v) => format!("{}", v[row]),
            ColumnData::Text(v) => v[row].clone().unwrap_or_default(),
            ColumnData::Codes(v) => v[row].to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub schema: ColumnSchema,
    pub data: ColumnData,
}

impl Column {
    pub fn name(&self) -> &str {
        &self.schema.name
    }

    pub fn kind(&self) -> ColumnKind {
        self.schema.kind
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Binary,
    MainCategory,
    SubCategory,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Binary, TaskKind::MainCategory, TaskKind::SubCategory];

    /// Class count of the task on the complete BoT-IoT label set.
    pub fn canonical_class_count(self) -> usize {
        match self {
            TaskKind::Binary => 2,
            TaskKind::MainCategory => 5,
            TaskKind::SubCategory => 11,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Binary => "binary",
            TaskKind::MainCategory => "main-category",
            TaskKind::SubCategory => "subcategory",
        })
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(TaskKind::Binary),
            "main-category" | "main" | "category" => Ok(TaskKind::MainCategory),
            "subcategory" | "sub" | "sub-category" => Ok(TaskKind::SubCategory),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

/// A labeling task together with its ordered class names; the class index
/// is the position in `class_names`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTask {
    pub variant: TaskKind,
    pub class_names: Vec<String>,
}

impl LabelTask {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_index(&self, name: &str) -> Option<u32> {
        self.class_names
            .iter()
            .position(|c| c == name)
            .map(|i| i as u32)
    }
}

/// Immutable columnar table of flow records.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTable {
    columns: Vec<Column>,
    row_count: usize,
    labels: Option<LabelTask>,
}

impl FlowTable {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        check_unique(columns.iter().map(|c| c.name()))?;
        let row_count = columns.first().map_or(0, |c| c.data.len());
        if let Some(bad) = columns.iter().find(|c| c.data.len() != row_count) {
            return Err(Error::Schema(format!(
                "column {:?} has {} rows, expected {row_count}",
                bad.name(),
                bad.data.len()
            )));
        }
        Ok(FlowTable {
            columns,
            row_count,
            labels: None,
        })
    }

    /// An empty table laid out per `schema`.
    pub fn empty(schema: &Schema) -> Self {
        let columns = schema
            .columns()
            .iter()
            .map(|c| Column {
                schema: c.clone(),
                data: empty_data(c.kind),
            })
            .collect();
        FlowTable {
            columns,
            row_count: 0,
            labels: None,
        }
    }

    pub(crate) fn with_labels(mut self, labels: Option<LabelTask>) -> Self {
        self.labels = labels;
        self
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name() == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name() == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column> {
        self.column(name)
            .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
    }

    pub fn column_of_kind(&self, kind: ColumnKind) -> Option<&Column> {
        self.columns.iter().find(|c| c.kind() == kind)
    }

    /// The task and class names attached by [`derive_labels`].
    pub fn labels(&self) -> Option<&LabelTask> {
        self.labels.as_ref()
    }

    /// Integer class codes of the derived target column.
    pub fn target(&self) -> Result<&[u32]> {
        match &self.require(TARGET_COLUMN)?.data {
            ColumnData::Codes(c) => Ok(c),
            _ => Err(Error::Type(format!("{TARGET_COLUMN:?} is not integer-encoded"))),
        }
    }

    /// Names of candidate model inputs, in column order.
    pub fn feature_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.kind().is_feature())
            .map(|c| c.name().to_string())
            .collect()
    }

    /// Dense row-major matrix of the named features. Text columns must have
    /// been indexed first.
    pub fn feature_matrix(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let cols = names
            .iter()
            .map(|n| {
                let col = self.require(n)?;
                match col.data {
                    ColumnData::Text(_) => Err(Error::Type(format!(
                        "feature {n:?} holds raw strings; index it first"
                    ))),
                    _ => Ok(&col.data),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.row_count)
            .map(|r| cols.iter().map(|c| c.value(r).unwrap_or(f64::NAN)).collect())
            .collect())
    }

    /// Rows selected by index, in the given order.
    pub fn take(&self, rows: &[usize]) -> FlowTable {
        FlowTable {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    schema: c.schema.clone(),
                    data: c.data.take(rows),
                })
                .collect(),
            row_count: rows.len(),
            labels: self.labels.clone(),
        }
    }

    /// Returns a table with `column` replacing the same-named column, or
    /// appended when absent.
    pub fn with_column(&self, column: Column) -> Result<FlowTable> {
        if column.data.len() != self.row_count && !self.columns.is_empty() {
            return Err(Error::Schema(format!(
                "column {:?} has {} rows, table has {}",
                column.name(),
                column.data.len(),
                self.row_count
            )));
        }
        let mut columns = self.columns.clone();
        match columns.iter().position(|c| c.name() == column.name()) {
            Some(i) => columns[i] = column,
            None => columns.push(column),
        }
        let mut out = FlowTable::new(columns)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Keeps only the named columns (in the given order) plus the target.
    pub fn select_columns(&self, names: &[String]) -> Result<FlowTable> {
        let mut columns = names
            .iter()
            .map(|n| self.require(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        if let Some(t) = self.column(TARGET_COLUMN) {
            if !names.iter().any(|n| n == TARGET_COLUMN) {
                columns.push(t.clone());
            }
        }
        let mut out = FlowTable::new(columns)?;
        out.row_count = self.row_count;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Concatenates tables with identical column layouts.
    pub fn concat(tables: &[FlowTable]) -> Result<FlowTable> {
        let Some(first) = tables.first() else {
            return FlowTable::new(Vec::new());
        };
        let mut columns: Vec<Column> = first.columns.clone();
        for t in &tables[1..] {
            if t.columns.len() != columns.len()
                || t.columns.iter().zip(&columns).any(|(a, b)| a.schema != b.schema)
            {
                return Err(Error::Schema("cannot concatenate tables with different layouts".into()));
            }
            for (dst, src) in columns.iter_mut().zip(&t.columns) {
                match (&mut dst.data, &src.data) {
                    (ColumnData::Numeric(d), ColumnData::Numeric(s)) => d.extend_from_slice(s),
                    (ColumnData::Text(d), ColumnData::Text(s)) => d.extend_from_slice(s),
                    (ColumnData::Codes(d), ColumnData::Codes(s)) => d.extend_from_slice(s),
                    _ => {
                        return Err(Error::Type(format!(
                            "column {:?} changes storage type",
                            src.name()
                        )))
                    }
                }
            }
        }
        let row_count = tables.iter().map(|t| t.row_count).sum();
        Ok(FlowTable {
            columns,
            row_count,
            labels: first.labels.clone(),
        })
    }

    /// True when any non-excluded cell of `row` is missing.
    pub fn row_has_missing(&self, row: usize) -> bool {
        self.columns
            .iter()
            .filter(|c| c.kind() != ColumnKind::Excluded)
            .any(|c| c.data.is_missing(row))
    }

    /// Per-row class name used for reporting and sampling: the concatenated
    /// subcategory class when category and subcategory columns exist, else the
    /// finest label available. Rows with no usable label map to "unlabeled".
    pub fn row_class_names(&self) -> Vec<String> {
        if let (Some(task), Ok(codes)) = (&self.labels, self.target()) {
            if task.variant == TaskKind::SubCategory {
                return codes.iter().map(|&c| task.class_names[c as usize].clone()).collect();
            }
        }
        let cat = self.column_of_kind(ColumnKind::LabelCategory);
        let sub = self.column_of_kind(ColumnKind::LabelSubcategory);
        let bin = self.column_of_kind(ColumnKind::LabelBinary);
        (0..self.row_count)
            .map(|r| {
                let c = cat.and_then(|c| text_at(&c.data, r));
                let s = sub.and_then(|c| text_at(&c.data, r));
                match (c, s) {
                    (Some(c), Some(s)) => subcategory_class(&c, &s),
                    (Some(c), None) => c,
                    (None, _) => bin
                        .and_then(|b| text_at(&b.data, r))
                        .and_then(|v| binary_class(&v).ok())
                        .map(|i| BINARY_CLASSES[i as usize].to_string())
                        .unwrap_or_else(|| "unlabeled".to_string()),
                }
            })
            .collect()
    }
}

fn empty_data(kind: ColumnKind) -> ColumnData {
    match kind {
        ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
        ColumnKind::Target => ColumnData::Codes(Vec::new()),
        _ => ColumnData::Text(Vec::new()),
    }
}

fn text_at(data: &ColumnData, row: usize) -> Option<String> {
    match data {
        ColumnData::Text(v) => v[row].clone(),
        ColumnData::Numeric(v) if v[row].is_nan() => None,
        ColumnData::Numeric(v) => Some(format!("{}", v[row])),
        ColumnData::Codes(v) => Some(v[row].to_string()),
    }
}

pub const BINARY_CLASSES: [&str; 2] = ["normal", "attack"];

fn binary_class(raw: &str) -> Result<u32> {
    let v = raw.trim();
    if v == "1" || v.eq_ignore_ascii_case("attack") {
        Ok(1)
    } else if v == "0" || v.eq_ignore_ascii_case("normal") {
        Ok(0)
    } else {
        Err(Error::Data(format!("unrecognized binary label {raw:?}")))
    }
}

/// Joined class name for the subcategory task. BoT-IoT repeats "Normal" in
/// both label columns for benign flows; that class keeps the single name.
pub fn subcategory_class(category: &str, subcategory: &str) -> String {
    if subcategory.is_empty() || category.eq_ignore_ascii_case(subcategory) {
        category.to_string()
    } else {
        format!("{category}_{subcategory}")
    }
}

/// Orders distinct values by descending frequency, ties broken
/// lexicographically ascending.
pub fn frequency_order<'a, I>(values: I) -> Vec<String>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: HashMap<&'a str, u64> = HashMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let mut ordered: Vec<(&str, u64)> = counts.into_iter().collect();
    ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ordered.into_iter().map(|(v, _)| v.to_string()).collect()
}

fn raw_label_names(table: &FlowTable, task: TaskKind) -> Result<Vec<String>> {
    let label = |kind: ColumnKind, what: &str| {
        table.column_of_kind(kind).ok_or_else(|| {
            Error::Schema(format!("task {task} needs a {what} label column"))
        })
    };
    let cell = |col: &Column, r: usize| {
        text_at(&col.data, r).ok_or_else(|| {
            Error::Data(format!("row {r}: missing value in label column {:?}", col.name()))
        })
    };
    match task {
        TaskKind::Binary => {
            let col = label(ColumnKind::LabelBinary, "label-binary")?;
            (0..table.row_count())
                .map(|r| Ok(BINARY_CLASSES[binary_class(&cell(col, r)?)? as usize].to_string()))
                .collect()
        }
        TaskKind::MainCategory => {
            let col = label(ColumnKind::LabelCategory, "label-category")?;
            (0..table.row_count()).map(|r| cell(col, r)).collect()
        }
        TaskKind::SubCategory => {
            let cat = label(ColumnKind::LabelCategory, "label-category")?;
            let sub = label(ColumnKind::LabelSubcategory, "label-subcategory")?;
            (0..table.row_count())
                .map(|r| Ok(subcategory_class(&cell(cat, r)?, &cell(sub, r)?)))
                .collect()
        }
    }
}

/// Appends (or replaces) the integer [`TARGET_COLUMN`] for `task`.
///
/// Class indices follow descending frequency with lexicographic tie-break;
/// the binary task is pinned to normal=0, attack=1.
pub fn derive_labels(table: &FlowTable, task: TaskKind) -> Result<FlowTable> {
    let names = raw_label_names(table, task)?;
    let class_names = match task {
        TaskKind::Binary => BINARY_CLASSES.iter().map(|s| s.to_string()).collect(),
        _ => frequency_order(names.iter().map(String::as_str)),
    };
    if task != TaskKind::Binary && !class_names.is_empty() && class_names.len() != task.canonical_class_count() {
        log::warn!(
            "task {task}: found {} classes, the full label set has {}",
            class_names.len(),
            task.canonical_class_count()
        );
    }
    encode_target(table, LabelTask { variant: task, class_names }, &names)
}

/// Like [`derive_labels`] but maps onto a fixed class list, e.g. the classes
/// a model was trained on. Unknown class names are a data error.
pub fn derive_labels_with(table: &FlowTable, task: &LabelTask) -> Result<FlowTable> {
    let names = raw_label_names(table, task.variant)?;
    encode_target(table, task.clone(), &names)
}

fn encode_target(table: &FlowTable, task: LabelTask, names: &[String]) -> Result<FlowTable> {
    let lookup: HashMap<&str, u32> = task
        .class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i as u32))
        .collect();
    let codes = names
        .iter()
        .map(|n| {
            lookup
                .get(n.as_str())
                .copied()
                .ok_or_else(|| Error::Data(format!("class {n:?} not in task class list")))
        })
        .collect::<Result<Vec<u32>>>()?;
    let out = table.with_column(Column {
        schema: ColumnSchema::new(TARGET_COLUMN, ColumnKind::Target),
        data: ColumnData::Codes(codes),
    })?;
    Ok(out.with_labels(Some(task)))
}

/// Per-class row counts of an integer-encoded class column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub class_names: Vec<String>,
    pub counts: Vec<u64>,
}

impl ClassCounts {
    pub fn get(&self, class: &str) -> Option<u64> {
        self.class_names
            .iter()
            .position(|c| c == class)
            .map(|i| self.counts[i])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_map(&self) -> BTreeMap<String, u64> {
        self.class_names.iter().cloned().zip(self.counts.iter().copied()).collect()
    }
}

pub fn class_counts(table: &FlowTable, target_col: &str) -> Result<ClassCounts> {
    let codes = match &table.require(target_col)?.data {
        ColumnData::Codes(c) => c,
        _ => return Err(Error::Type(format!("{target_col:?} is not integer-encoded"))),
    };
    let class_names: Vec<String> = match (&table.labels, target_col == TARGET_COLUMN) {
        (Some(task), true) => task.class_names.clone(),
        _ => {
            let n = codes.iter().max().map_or(0, |&m| m as usize + 1);
            (0..n).map(|i| i.to_string()).collect()
        }
    };
    let mut counts = vec![0u64; class_names.len()];
    for &c in codes {
        let slot = counts
            .get_mut(c as usize)
            .ok_or_else(|| Error::Data(format!("class code {c} out of range")))?;
        *slot += 1;
    }
    Ok(ClassCounts { class_names, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(rows: &[(&str, &str, &str)]) -> FlowTable {
        let text = |i: usize| {
            ColumnData::Text(rows.iter().map(|r| Some([r.0, r.1, r.2][i].to_string())).collect())
        };
        FlowTable::new(vec![
            Column {
                schema: ColumnSchema::new("x", ColumnKind::Numeric),
                data: ColumnData::Numeric((0..rows.len()).map(|i| i as f64).collect()),
            },
            Column {
                schema: ColumnSchema::new("attack", ColumnKind::LabelBinary),
                data: text(0),
            },
            Column {
                schema: ColumnSchema::new("category", ColumnKind::LabelCategory),
                data: text(1),
            },
            Column {
                schema: ColumnSchema::new("subcategory", ColumnKind::LabelSubcategory),
                data: text(2),
            },
        ])
        .unwrap()
    }

    #[test]
    fn subcategory_names_are_joined() {
        let t = labelled(&[("1", "DDoS", "TCP"), ("0", "Normal", "Normal")]);
        let out = derive_labels(&t, TaskKind::SubCategory).unwrap();
        let task = out.labels().unwrap();
        let names: Vec<_> = out.target().unwrap().iter().map(|&c| task.class_names[c as usize].as_str()).collect();
        assert_eq!(names, ["DDoS_TCP", "Normal"]);
    }

    #[test]
    fn binary_pins_attack_to_one() {
        let t = labelled(&[("attack", "DoS", "UDP"), ("normal", "Normal", "Normal"), ("1", "DoS", "UDP")]);
        let out = derive_labels(&t, TaskKind::Binary).unwrap();
        assert_eq!(out.target().unwrap(), &[1, 0, 1]);
        assert_eq!(out.labels().unwrap().class_names, ["normal", "attack"]);
    }

    #[test]
    fn empty_table_gets_target_column() {
        let t = labelled(&[]);
        for task in TaskKind::ALL {
            let out = derive_labels(&t, task).unwrap();
            assert_eq!(out.row_count(), 0);
            assert!(out.column(TARGET_COLUMN).is_some());
        }
    }

    #[test]
    fn missing_label_column_is_named() {
        let t = FlowTable::new(vec![Column {
            schema: ColumnSchema::new("attack", ColumnKind::LabelBinary),
            data: ColumnData::Text(vec![Some("1".into())]),
        }])
        .unwrap();
        let err = derive_labels(&t, TaskKind::MainCategory).unwrap_err();
        assert!(err.to_string().contains("label-category"), "{err}");
    }

    #[test]
    fn derive_labels_is_idempotent() {
        let t = labelled(&[("1", "DoS", "UDP"), ("1", "DDoS", "TCP"), ("1", "DoS", "UDP")]);
        let once = derive_labels(&t, TaskKind::MainCategory).unwrap();
        let twice = derive_labels(&once, TaskKind::MainCategory).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.labels().unwrap().class_names, ["DoS", "DDoS"]);
    }

    #[test]
    fn class_counts_cover_all_classes() {
        let t = labelled(&[("0", "Normal", "Normal"), ("0", "Normal", "Normal"), ("1", "DoS", "TCP")]);
        let out = derive_labels(&t, TaskKind::Binary).unwrap();
        let counts = class_counts(&out, TARGET_COLUMN).unwrap();
        assert_eq!(counts.counts, vec![2, 1]);
        assert_eq!(counts.total(), 3);

        let empty = derive_labels(&labelled(&[]), TaskKind::Binary).unwrap();
        assert_eq!(class_counts(&empty, TARGET_COLUMN).unwrap().counts, vec![0, 0]);
    }

    #[test]
    fn class_counts_rejects_non_integer_column() {
        let t = labelled(&[("0", "Normal", "Normal")]);
        assert!(matches!(class_counts(&t, "x"), Err(Error::Type(_))));
    }

    #[test]
    fn bot_iot_has_eleven_subcategory_classes() {
        let rows = [
            ("DDoS", "TCP"),
            ("DoS", "HTTP"),
            ("DoS", "UDP"),
            ("Theft", "Data_Exfiltration"),
            ("DDoS", "HTTP"),
            ("Theft", "Keylogging"),
            ("DDoS", "UDP"),
            ("Reconnaissance", "OS_Fingerprint"),
            ("Reconnaissance", "Service_Scan"),
            ("Normal", "Normal"),
            ("DoS", "TCP"),
        ];
        let names: HashSet<String> = rows.iter().map(|(c, s)| subcategory_class(c, s)).collect();
        assert_eq!(names.len(), 11);
        assert!(names.contains("Theft_Data_Exfiltration"));
        assert!(names.contains("Normal"));
    }

    #[test]
    fn schema_requires_one_binary_label() {
        let err = Schema::new(vec![ColumnSchema::new("a", ColumnKind::Numeric)]).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        let dup = Schema::new(vec![
            ColumnSchema::new("a", ColumnKind::LabelBinary),
            ColumnSchema::new("a", ColumnKind::Numeric),
        ]);
        assert!(dup.is_err());
    }

    #[test]
    fn bundled_schemas_exclude_addresses() {
        for schema in [Schema::bot_iot(), Schema::bot_iot_5pct()] {
            for name in ["saddr", "daddr"] {
                let c = schema.columns().iter().find(|c| c.name == name).unwrap();
                assert_eq!(c.kind, ColumnKind::Excluded);
            }
            for name in ["proto", "flgs", "state", "sport", "dport"] {
                let c = schema.columns().iter().find(|c| c.name == name).unwrap();
                assert_eq!(c.kind, ColumnKind::Categorical);
            }
        }
    }
}
