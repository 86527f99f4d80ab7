//! Confusion matrices, per-class precision/recall/F1, macro F1 and
//! cross-validation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifiers::{train, ClassifierConfig, ClassifierKind, ClassifierModel, TrainingSet};
use crate::dataset::{FlowTable, LabelTask, TaskKind};
use crate::error::{Error, Result};
use crate::feature_select::FeatureCount;
use crate::partitioned_exec::Executor;
use crate::preprocess::{min_max_normalize, FoldAssignment};

/// `counts[actual][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        ConfusionMatrix {
            n_classes,
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.counts[i][i]).sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    /// Rows of other classes predicted as `class`.
    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.n_classes)
            .filter(|&a| a != class)
            .map(|a| self.counts[a][class])
            .sum()
    }

    /// Rows of `class` predicted as something else.
    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.n_classes)
            .filter(|&p| p != class)
            .map(|p| self.counts[class][p])
            .sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Fraction of rows on the diagonal; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }
}

pub fn confusion_matrix(actual: &[u32], predicted: &[u32], n_classes: usize) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::Data(format!(
            "{} actual labels but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (&a, &p) in actual.iter().zip(predicted) {
        if a as usize >= n_classes || p as usize >= n_classes {
            return Err(Error::Data(format!("class ({a}, {p}) outside 0..{n_classes}")));
        }
        cm.counts[a as usize][p as usize] += 1;
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 from precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision, recall and F1 of one class. Any 0/0 is taken as 0.
pub fn per_class_f1(cm: &ConfusionMatrix, class: usize) -> ClassScores {
    let tp = cm.true_positives(class);
    let precision = ratio(tp, tp + cm.false_positives(class));
    let recall = ratio(tp, tp + cm.false_negatives(class));
    ClassScores {
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

/// Unweighted mean of per-class F1 values.
pub fn mean_f1(per_class: &[f64]) -> f64 {
    if per_class.is_empty() {
        return 0.0;
    }
    per_class.iter().sum::<f64>() / per_class.len() as f64
}

pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    let f1s: Vec<f64> = (0..cm.n_classes).map(|c| per_class_f1(cm, c).f1).collect();
    mean_f1(&f1s)
}

/// Support-weighted mean of per-class F1.
pub fn weighted_f1(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total == 0 {
        return 0.0;
    }
    (0..cm.n_classes)
        .map(|c| per_class_f1(cm, c).f1 * cm.support(c) as f64)
        .sum::<f64>()
        / total as f64
}

/// A fraction as a percentage with one decimal. The value is first snapped
/// to a 1e-6 percent grid so binary representation error (0.9965 is stored
/// as 0.99649999...) does not flip the half-up rounding.
pub fn percent_one_decimal(x: f64) -> f64 {
    let snapped = (x * 100.0 * 1e6).round() / 1e6;
    (snapped * 10.0).round() / 10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub classifier: ClassifierKind,
    pub task: TaskKind,
    pub features: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_k: Option<FeatureCount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub meta: ReportMeta,
    pub classes: Vec<ClassMetrics>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_confusion(cm: ConfusionMatrix, class_names: &[String], meta: ReportMeta) -> Self {
        let classes = (0..cm.n_classes)
            .map(|c| {
                let s = per_class_f1(&cm, c);
                ClassMetrics {
                    class: class_names.get(c).cloned().unwrap_or_else(|| c.to_string()),
                    precision: s.precision,
                    recall: s.recall,
                    f1: s.f1,
                    support: cm.support(c),
                }
            })
            .collect();
        MetricsReport {
            meta,
            classes,
            macro_f1: macro_f1(&cm),
            weighted_f1: weighted_f1(&cm),
            accuracy: cm.accuracy(),
            confusion: cm,
        }
    }

    /// Text table with percentages at one decimal.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} / {} / {} features",
            self.meta.classifier, self.meta.task, self.meta.features
        );
        let width = self.classes.iter().map(|c| c.class.len()).max().unwrap_or(5).max(5);
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>9}  {:>9}  {:>8}", "class", "precision", "recall", "f1", "support");
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{:<width$}  {:>8.1}%  {:>8.1}%  {:>8.1}%  {:>8}",
                c.class,
                percent_one_decimal(c.precision),
                percent_one_decimal(c.recall),
                percent_one_decimal(c.f1),
                c.support
            );
        }
        let _ = writeln!(
            out,
            "macro f1 {:.1}%  weighted f1 {:.1}%  accuracy {:.1}%",
            percent_one_decimal(self.macro_f1),
            percent_one_decimal(self.weighted_f1),
            percent_one_decimal(self.accuracy)
        );
        out
    }

    /// `class,precision,recall,f1,support` rows for external plotting.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1,support\n");
        for c in &self.classes {
            let _ = writeln!(out, "{},{},{},{},{}", c.class, c.precision, c.recall, c.f1, c.support);
        }
        out
    }
}

/// Scores `model` on a labelled test table whose classes match the model's.
pub fn evaluate_model(model: &ClassifierModel, test: &FlowTable, task: &LabelTask) -> Result<MetricsReport> {
    if test.row_count() == 0 {
        return Err(Error::Data("test set is empty".into()));
    }
    if task.class_names != model.task.class_names {
        return Err(Error::Data(format!(
            "test classes {:?} differ from model classes {:?}",
            task.class_names, model.task.class_names
        )));
    }
    if let Some(missing) = model.feature_names.iter().find(|f| test.column(f).is_none()) {
        return Err(Error::Schema(format!("test table lacks model feature {missing:?}")));
    }
    let actual = test.target()?;
    let predicted = model.predict_table(test)?;
    let cm = confusion_matrix(actual, &predicted, model.num_classes())?;
    let meta = ReportMeta {
        classifier: model.kind(),
        task: task.variant,
        features: model.feature_names.len(),
        feature_k: None,
        seed: None,
    };
    Ok(MetricsReport::from_confusion(cm, &task.class_names, meta))
}

/// Fits normalization on `train`, trains, and scores on `test`.
pub fn fit_and_evaluate(
    train_table: &FlowTable,
    test_table: &FlowTable,
    features: &[String],
    config: &ClassifierConfig,
    exec: &Executor,
) -> Result<(ClassifierModel, MetricsReport)> {
    let task = train_table
        .labels()
        .ok_or_else(|| Error::Schema("training table has no derived target".into()))?
        .clone();
    let (normalized, params) = min_max_normalize(train_table, features, None)?;
    let set = TrainingSet::from_table(&normalized, features)?;
    let mut model = train(config, &set, &task, exec)?;
    model.normalization = Some(params);
    let report = evaluate_model(&model, test_table, &task)?;
    Ok((model, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MeanStd { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub k: usize,
    pub macro_f1: MeanStd,
    pub weighted_f1: MeanStd,
    pub accuracy: MeanStd,
    /// Per-class F1 averaged over folds, in class order.
    pub class_f1: Vec<MeanStd>,
    pub folds: Vec<MetricsReport>,
}

/// k rounds with fold `i` held out; per-fold reports are kept in fold order.
pub fn cross_validate(
    table: &FlowTable,
    features: &[String],
    config: &ClassifierConfig,
    folds: &FoldAssignment,
    exec: &Executor,
) -> Result<CrossValidation> {
    if folds.folds.len() != table.row_count() {
        return Err(Error::Config(format!(
            "fold assignment covers {} rows, table has {}",
            folds.folds.len(),
            table.row_count()
        )));
    }
    let mut reports = Vec::with_capacity(folds.k);
    for i in 0..folds.k {
        let test_rows = folds.test_rows(i);
        if test_rows.is_empty() {
            return Err(Error::Data(format!("fold {i} is empty")));
        }
        let train_rows = folds.train_rows(i);
        let (_, report) = fit_and_evaluate(&table.take(&train_rows), &table.take(&test_rows), features, config, exec)?;
        reports.push(report);
    }
    let collect = |f: fn(&MetricsReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    let n_classes = reports.first().map_or(0, |r| r.classes.len());
    let class_f1 = (0..n_classes)
        .map(|c| MeanStd::of(&reports.iter().map(|r| r.classes[c].f1).collect::<Vec<_>>()))
        .collect();
    Ok(CrossValidation {
        k: folds.k,
        macro_f1: collect(|r| r.macro_f1),
        weighted_f1: collect(|r| r.weighted_f1),
        accuracy: collect(|r| r.accuracy),
        class_f1,
        folds: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let cm = confusion_matrix(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);
        let perfect = confusion_matrix(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(perfect.trace(), 3);
        assert_eq!(confusion_matrix(&[], &[], 2).unwrap().total(), 0);
        assert!(confusion_matrix(&[2], &[0], 2).is_err());
    }

    #[test]
    fn f1_examples() {
        let mut cm = ConfusionMatrix::zeros(2);
        cm.counts = vec![vec![5, 0], vec![0, 0]];
        let s = per_class_f1(&cm, 0);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));

        // class 0: TP 8, FP 2, FN 4
        cm.counts = vec![vec![8, 4], vec![2, 0]];
        let s = per_class_f1(&cm, 0);
        assert!((s.precision - 0.8).abs() < 1e-12);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.f1 - 16.0 / 22.0).abs() < 1e-12);

        cm.counts = vec![vec![0, 3], vec![0, 0]];
        let s = per_class_f1(&cm, 0);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn macro_examples() {
        assert_eq!(percent_one_decimal(mean_f1(&[0.999, 0.994])), 99.7);
        assert_eq!(mean_f1(&[1.0, 0.0]), 0.5);
        let perfect = confusion_matrix(&[0, 1], &[0, 1], 2).unwrap();
        assert_eq!(macro_f1(&perfect), 1.0);
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        let cm = confusion_matrix(&[0, 0, 1, 1], &[0, 0, 0, 0], 2).unwrap();
        assert_eq!(cm.accuracy(), 0.5);
        assert!((macro_f1(&cm) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(percent_one_decimal(0.9965), 99.7);
        assert_eq!(percent_one_decimal(0.994), 99.4);
        assert_eq!(percent_one_decimal(0.5), 50.0);
        assert_eq!(percent_one_decimal(0.12344), 12.3);
    }
}
