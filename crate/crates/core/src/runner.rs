//! Experiment orchestration: single runs, the classifier × feature-count ×
//! task matrix, and report output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierConfig, ClassifierKind, ForestParams, TreeParams, DEFAULT_SMOOTHING};
use crate::dataset::{class_counts, derive_labels, ClassCounts, FlowTable, Schema, TaskKind, TARGET_COLUMN};
use crate::error::{Error, Result};
use crate::evaluate::{
    confusion_matrix, cross_validate, fit_and_evaluate, percent_one_decimal, ConfusionMatrix, CrossValidation,
    MetricsReport, ReportMeta,
};
use crate::feature_select::{select_top_k, ChiSqRanking, FeatureCount, DEFAULT_NUM_BINS};
use crate::ingest::{union_shards, ShardManifest};
use crate::partitioned_exec::{Executor, DEFAULT_PARTITIONS};
use crate::preprocess::{
    drop_duplicates, drop_missing, index_strings, make_folds, min_max_normalize, split_train_test, string_columns,
    undersample, IndexMap, MissingReport, SamplingPlan, DEFAULT_FOLDS, DEFAULT_TRAIN_FRACTION,
};

/// Per-class cap of the default undersampling plan.
pub const DEFAULT_CLASS_CAP: u64 = 3_490;

pub const SEED_ENV: &str = "FLOWFORGE_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Sampling {
    /// Keep at most `cap` rows per class.
    Cap { cap: u64 },
    /// Explicit keep ratio per class.
    Ratios { ratios: BTreeMap<String, f64> },
    None,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Cap { cap: DEFAULT_CLASS_CAP }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SplitMode {
    Holdout {
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
        #[serde(default = "yes")]
        stratified: bool,
    },
    Kfold {
        #[serde(default = "default_folds")]
        k: usize,
        #[serde(default = "yes")]
        stratified: bool,
    },
}

impl Default for SplitMode {
    fn default() -> Self {
        SplitMode::Holdout {
            train_fraction: DEFAULT_TRAIN_FRACTION,
            stratified: true,
        }
    }
}

fn default_train_fraction() -> f64 {
    DEFAULT_TRAIN_FRACTION
}
fn default_folds() -> usize {
    DEFAULT_FOLDS
}
fn yes() -> bool {
    true
}
fn default_partitions() -> usize {
    DEFAULT_PARTITIONS
}
fn default_num_bins() -> usize {
    DEFAULT_NUM_BINS
}
fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}
fn default_feature_k() -> FeatureCount {
    FeatureCount::All
}

/// Everything that determines a run. Serialized into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// CSV shards or glob patterns, unioned in order.
    pub inputs: Vec<PathBuf>,
    /// Schema JSON; the bundled 74-shard BoT-IoT schema when absent.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default = "yes")]
    pub header: bool,
    pub task: TaskKind,
    pub classifier: ClassifierKind,
    #[serde(default = "default_feature_k")]
    pub feature_k: FeatureCount,
    #[serde(default)]
    pub sampling: Sampling,
    /// Full-data protocol: no undersampling, all features.
    #[serde(default)]
    pub full_data: bool,
    #[serde(default)]
    pub force_selection: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub split: SplitMode,
    #[serde(default = "default_partitions")]
    pub partitions: usize,
    /// Worker threads; 0 means one per core.
    #[serde(default)]
    pub workers: usize,
    /// Equal-width bins used to discretize features for chi-square.
    #[serde(default = "default_num_bins")]
    pub num_bins: usize,
    #[serde(default)]
    pub tree: TreeParams,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default = "default_smoothing")]
    pub nb_smoothing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(inputs: Vec<PathBuf>, task: TaskKind, classifier: ClassifierKind) -> Self {
        ExperimentConfig {
            inputs,
            schema: None,
            header: true,
            task,
            classifier,
            feature_k: FeatureCount::All,
            sampling: Sampling::default(),
            full_data: false,
            force_selection: false,
            seed: 0,
            split: SplitMode::default(),
            partitions: DEFAULT_PARTITIONS,
            workers: 0,
            num_bins: DEFAULT_NUM_BINS,
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            nb_smoothing: DEFAULT_SMOOTHING,
            output_dir: None,
        }
    }

    /// Reads a config file. Relative input, schema and output paths resolve
    /// against the file's directory.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.inputs.iter_mut().for_each(fix);
        config.schema.iter_mut().for_each(fix);
        config.output_dir.iter_mut().for_each(fix);
        Ok(config)
    }

    /// Applies the `FLOWFORGE_SEED` override when set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::Config("no input files".into()));
        }
        if self.full_data && self.feature_k != FeatureCount::All && !self.force_selection {
            return Err(Error::Config(format!(
                "full-data runs use all features; feature_k={} needs force_selection",
                self.feature_k
            )));
        }
        if self.partitions == 0 {
            return Err(Error::Config("partitions must be at least 1".into()));
        }
        match self.split {
            SplitMode::Holdout { train_fraction, .. } if !(train_fraction > 0.0 && train_fraction < 1.0) => {
                return Err(Error::Config(format!("train fraction {train_fraction} not in (0,1)")))
            }
            SplitMode::Kfold { k, .. } if k < 2 => return Err(Error::Config("k-fold needs k >= 2".into())),
            _ => {}
        }
        if let Sampling::Ratios { ratios } = &self.sampling {
            SamplingPlan::new(ratios.clone(), self.seed)?;
        }
        self.tree.validate()?;
        Ok(())
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        let mut forest = self.forest.clone();
        forest.seed = forest.seed.wrapping_add(self.seed);
        ClassifierConfig {
            kind: self.classifier,
            tree: self.tree.clone(),
            forest,
            nb_smoothing: self.nb_smoothing,
        }
    }

    pub fn load_schema(&self) -> Result<Schema> {
        match &self.schema {
            Some(p) => Schema::from_json_file(p),
            None => Ok(Schema::bot_iot()),
        }
    }

    fn shard_paths(&self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for p in &self.inputs {
            let s = p.to_string_lossy();
            if s.contains(['*', '?', '[']) {
                out.extend(ShardManifest::resolve(&s)?.paths);
            } else {
                out.push(p.clone());
            }
        }
        Ok(out)
    }

    /// Short identifier of the matrix cell this config describes.
    pub fn cell_id(&self) -> String {
        format!("{}/{}/{}", self.task, self.classifier, self.feature_k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCount {
    pub before: u64,
    pub after: u64,
}

/// Wall-clock milliseconds per stage, in pipeline order.
pub type StageTimings = Vec<(String, f64)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub rows_ingested: u64,
    pub duplicates_removed: u64,
    pub missing: MissingReport,
    pub sampling: BTreeMap<String, SampleCount>,
    pub index_maps: Vec<IndexMap>,
    pub class_counts: ClassCounts,
    pub train_rows: u64,
    pub test_rows: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<ChiSqRanking>,
    pub selected_features: Vec<String>,
    pub metrics: MetricsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_validation: Option<CrossValidation>,
    pub timings_ms: StageTimings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Report without timings: identical bytes for identical inputs.
    pub fn metrics_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timings_ms");
        }
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "run {}", self.config.cell_id());
        let _ = writeln!(
            out,
            "rows {} ingested, {} duplicates, {} with missing values, {} train, {} test",
            self.rows_ingested,
            self.duplicates_removed,
            self.missing.total(),
            self.train_rows,
            self.test_rows
        );
        let _ = writeln!(out, "features: {}", self.selected_features.join(", "));
        out.push_str(&self.metrics.render());
        if let Some(cv) = &self.cross_validation {
            let _ = writeln!(
                out,
                "{}-fold macro f1 {:.1}% ± {:.1}",
                cv.k,
                percent_one_decimal(cv.macro_f1.mean),
                cv.macro_f1.std * 100.0
            );
        }
        for (stage, ms) in &self.timings_ms {
            let _ = writeln!(out, "  {stage:<10} {ms:>10.1} ms");
        }
        out
    }

    /// Writes `report.json`, `metrics.json` and `summary.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("report.json", self.to_json()),
            ("metrics.json", self.metrics_json()),
            ("summary.txt", self.summary()),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

struct Stopwatch {
    timings: StageTimings,
}

impl Stopwatch {
    fn new() -> Self {
        Stopwatch { timings: Vec::new() }
    }

    fn stage<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(name))?;
        self.timings.push((name.to_string(), start.elapsed().as_secs_f64() * 1e3));
        Ok(out)
    }
}

/// Output of the task-independent preprocessing stages.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub table: FlowTable,
    pub rows_ingested: u64,
    pub duplicates_removed: u64,
    pub missing: MissingReport,
    pub sampling: BTreeMap<String, SampleCount>,
    pub index_maps: Vec<IndexMap>,
    pub timings_ms: StageTimings,
}

fn count_by_name(names: &[String]) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    for n in names {
        *m.entry(n.clone()).or_insert(0) += 1;
    }
    m
}

/// Ingest, string indexing, deduplication, missing-row removal and
/// undersampling.
pub fn prepare(config: &ExperimentConfig) -> Result<PreparedData> {
    config.validate()?;
    let mut sw = Stopwatch::new();
    let table = sw.stage("ingest", || {
        let schema = config.load_schema()?;
        let manifest = ShardManifest::new(config.shard_paths()?)?.with_header(config.header);
        union_shards(&manifest, &schema)
    })?;
    let rows_ingested = table.row_count() as u64;
    let (table, index_maps) = sw.stage("index", || index_strings(&table, &string_columns(&table)))?;
    let (table, duplicates) = sw.stage("dedup", || Ok(drop_duplicates(&table)))?;
    let (table, missing) = sw.stage("missing", || Ok(drop_missing(&table)))?;
    let (table, sampling) = sw.stage("sample", || {
        let names = table.row_class_names();
        let before = count_by_name(&names);
        let plan = match (&config.sampling, config.full_data) {
            (_, true) | (Sampling::None, _) => None,
            (Sampling::Cap { cap }, _) => Some(SamplingPlan::capped(&before, *cap, config.seed)),
            (Sampling::Ratios { ratios }, _) => Some(SamplingPlan::new(ratios.clone(), config.seed)?),
        };
        let sampled = match plan {
            Some(plan) => undersample(&table, &plan)?,
            None => table.clone(),
        };
        let after = count_by_name(&sampled.row_class_names());
        let summary = before
            .iter()
            .map(|(c, &b)| {
                let a = after.get(c).copied().unwrap_or(0);
                (c.clone(), SampleCount { before: b, after: a })
            })
            .collect();
        Ok((sampled, summary))
    })?;
    Ok(PreparedData {
        table,
        rows_ingested,
        duplicates_removed: duplicates as u64,
        missing,
        sampling,
        index_maps,
        timings_ms: sw.timings,
    })
}

fn selection_applies(config: &ExperimentConfig) -> bool {
    config.feature_k != FeatureCount::All && (!config.full_data || config.force_selection)
}

/// Label derivation, split, selection, training and evaluation on prepared
/// data. Uses the prepared table as is; ingest settings in `config` only
/// appear in the report.
pub fn run_prepared(prepared: &PreparedData, config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let exec = Executor::new(config.partitions, config.workers)?;
    let mut sw = Stopwatch::new();
    let labelled = sw.stage("labels", || derive_labels(&prepared.table, config.task))?;
    let counts = class_counts(&labelled, TARGET_COLUMN)?;
    let candidates = labelled.feature_names();
    let select = |table: &FlowTable| -> Result<(Option<ChiSqRanking>, Vec<String>)> {
        if !selection_applies(config) {
            return Ok((None, candidates.clone()));
        }
        let (normalized, _) = min_max_normalize(table, &candidates, None)?;
        let (ranking, chosen) = select_top_k(&normalized, TARGET_COLUMN, config.feature_k, config.num_bins)?;
        Ok((Some(ranking), chosen))
    };
    let classifier = config.classifier_config();
    let meta = ReportMeta {
        classifier: config.classifier,
        task: config.task,
        features: 0,
        feature_k: Some(config.feature_k),
        seed: Some(config.seed),
    };
    let (ranking, features, metrics, cv, train_rows, test_rows) = match config.split {
        SplitMode::Holdout {
            train_fraction,
            stratified,
        } => {
            let (train, test) =
                sw.stage("split", || split_train_test(&labelled, train_fraction, config.seed, stratified))?;
            let (ranking, features) = sw.stage("select", || select(&train))?;
            let (_, mut report) = sw.stage("train+eval", || {
                exec.install(|| fit_and_evaluate(&train, &test, &features, &classifier, &exec))
            })?;
            report.meta = ReportMeta {
                features: features.len(),
                ..meta
            };
            (ranking, features, report, None, train.row_count(), test.row_count())
        }
        SplitMode::Kfold { k, stratified } => {
            let folds = sw.stage("split", || make_folds(&labelled, k, config.seed, stratified))?;
            let (ranking, features) = sw.stage("select", || select(&labelled))?;
            let cv = sw.stage("train+eval", || {
                exec.install(|| cross_validate(&labelled, &features, &classifier, &folds, &exec))
            })?;
            let pooled = pool_confusion(&cv, counts.class_names.len())?;
            let report = MetricsReport::from_confusion(
                pooled,
                &counts.class_names,
                ReportMeta {
                    features: features.len(),
                    ..meta
                },
            );
            let n = labelled.row_count();
            (ranking, features, report, Some(cv), n, n)
        }
    };
    let mut timings_ms = prepared.timings_ms.clone();
    timings_ms.extend(sw.timings);
    Ok(RunReport {
        config: config.clone(),
        rows_ingested: prepared.rows_ingested,
        duplicates_removed: prepared.duplicates_removed,
        missing: prepared.missing.clone(),
        sampling: prepared.sampling.clone(),
        index_maps: prepared.index_maps.clone(),
        class_counts: counts,
        train_rows: train_rows as u64,
        test_rows: test_rows as u64,
        ranking,
        selected_features: features,
        metrics,
        cross_validation: cv,
        timings_ms,
    })
}

fn pool_confusion(cv: &CrossValidation, n: usize) -> Result<ConfusionMatrix> {
    let mut pooled = confusion_matrix(&[], &[], n)?;
    for fold in &cv.folds {
        for (row, src) in pooled.counts.iter_mut().zip(&fold.confusion.counts) {
            for (a, b) in row.iter_mut().zip(src) {
                *a += b;
            }
        }
    }
    Ok(pooled)
}

/// Runs the whole pipeline for one configuration and writes the report
/// files when `output_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let prepared = prepare(config)?;
    let report = run_prepared(&prepared, config)?;
    if let Some(dir) = &config.output_dir {
        report.write_to(dir)?;
    }
    Ok(report)
}

fn or_base<T: Copy>(axis: &[T], base: T) -> Vec<T> {
    if axis.is_empty() {
        vec![base]
    } else {
        axis.to_vec()
    }
}

/// Values to sweep. An empty axis keeps the base config's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatrixAxes {
    #[serde(default)]
    pub tasks: Vec<TaskKind>,
    #[serde(default)]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default)]
    pub feature_ks: Vec<FeatureCount>,
}

impl MatrixAxes {
    /// 3 tasks × 3 classifiers × {all, 10, 5}.
    pub fn partial() -> Self {
        MatrixAxes {
            tasks: TaskKind::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            feature_ks: FeatureCount::MATRIX.to_vec(),
        }
    }

    /// 3 tasks × 3 classifiers, all features.
    pub fn full() -> Self {
        MatrixAxes {
            tasks: TaskKind::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            feature_ks: vec![FeatureCount::All],
        }
    }

    /// Cell configs in task, classifier, feature-count order.
    pub fn cells(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let tasks = or_base(&self.tasks, base.task);
        let classifiers = or_base(&self.classifiers, base.classifier);
        let ks = or_base(&self.feature_ks, base.feature_k);
        let mut out = Vec::new();
        for &task in &tasks {
            for &classifier in &classifiers {
                for &feature_k in &ks {
                    out.push(ExperimentConfig {
                        task,
                        classifier,
                        feature_k,
                        output_dir: None,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub task: TaskKind,
    pub classifier: ClassifierKind,
    pub feature_k: FeatureCount,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub best: bool,
}

/// One row per cell; the best cell of each task is flagged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<MatrixRow>,
}

impl ComparisonTable {
    pub fn from_cells(cells: &[(ExperimentConfig, std::result::Result<RunReport, String>)]) -> Self {
        let mut rows: Vec<MatrixRow> = cells
            .iter()
            .map(|(c, r)| MatrixRow {
                task: c.task,
                classifier: c.classifier,
                feature_k: c.feature_k,
                macro_f1: r.as_ref().ok().map(|r| r.metrics.macro_f1),
                error: r.as_ref().err().cloned(),
                best: false,
            })
            .collect();
        let mut best: BTreeMap<String, usize> = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            let Some(f1) = row.macro_f1 else { continue };
            let slot = best.entry(row.task.to_string()).or_insert(i);
            if f1 > rows[*slot].macro_f1.unwrap_or(f64::NEG_INFINITY) {
                *slot = i;
            }
        }
        for i in best.into_values() {
            rows[i].best = true;
        }
        ComparisonTable { rows }
    }

    pub fn best(&self, task: TaskKind) -> Option<&MatrixRow> {
        self.rows.iter().find(|r| r.task == task && r.best)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:<4} {:>8} {:>10}", "task", "clf", "features", "macro f1");
        for r in &self.rows {
            let score = match (&r.macro_f1, &r.error) {
                (Some(f), _) => format!("{:.1}%", percent_one_decimal(*f)),
                (None, Some(_)) => "failed".to_string(),
                _ => "-".to_string(),
            };
            let flag = if r.best { " *" } else { "" };
            let _ = writeln!(
                out,
                "{:<14} {:<4} {:>8} {:>10}{flag}",
                r.task.to_string(),
                r.classifier.to_string(),
                r.feature_k.to_string(),
                score
            );
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct MatrixResult {
    pub cells: Vec<(ExperimentConfig, std::result::Result<RunReport, String>)>,
    pub table: ComparisonTable,
}

impl MatrixResult {
    /// Every successful cell's report without timings, failures by message.
    pub fn metrics_json(&self) -> String {
        let cells: Vec<serde_json::Value> = self
            .cells
            .iter()
            .map(|(c, r)| {
                let body = match r {
                    Ok(report) => serde_json::from_str(&report.metrics_json()).expect("valid json"),
                    Err(e) => serde_json::json!({ "error": e }),
                };
                serde_json::json!({ "cell": c.cell_id(), "report": body })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "cells": cells, "comparison": self.table }))
            .expect("matrix serializes")
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (c, r) in &self.cells {
            if let Ok(report) = r {
                let sub = dir.join(c.cell_id().replace('/', "_"));
                report.write_to(&sub)?;
            }
        }
        for (name, body) in [
            ("matrix.json", self.metrics_json()),
            ("comparison.txt", self.table.render()),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Runs every cell of `axes` over `base`. Preprocessing runs once; a failed
/// cell is recorded and the matrix continues. Cells run sequentially unless
/// `parallel` is set.
pub fn run_matrix(base: &ExperimentConfig, axes: &MatrixAxes, parallel: bool) -> Result<MatrixResult> {
    let cells = axes.cells(base);
    let prepared = prepare(base)?;
    let run = |c: &ExperimentConfig| {
        let r = run_prepared(&prepared, c).map_err(|e| {
            log::warn!("cell {} failed: {e}", c.cell_id());
            e.to_string()
        });
        (c.clone(), r)
    };
    let results: Vec<_> = if parallel {
        cells.par_iter().map(run).collect()
    } else {
        cells.iter().map(run).collect()
    };
    let table = ComparisonTable::from_cells(&results);
    let out = MatrixResult { cells: results, table };
    if let Some(dir) = &base.output_dir {
        out.write_to(dir)?;
    }
    Ok(out)
}
