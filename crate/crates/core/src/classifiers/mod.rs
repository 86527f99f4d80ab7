//! Decision tree, random forest and multinomial naive Bayes classifiers.

pub mod forest;
pub mod naive_bayes;
pub mod tree;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use forest::{train_random_forest, FeatureSubset, ForestParams, RandomForest};
pub use naive_bayes::{train_naive_bayes, NbModel, NbVariant, DEFAULT_SMOOTHING};
pub use tree::{
    compute_bin_boundaries, gini_impurity, train_decision_tree, DecisionTree, Impurity, TreeNode, TreeParams,
};

use crate::dataset::{FlowTable, LabelTask};
use crate::error::{Error, Result};
use crate::partitioned_exec::Executor;
use crate::preprocess::{apply_index_maps, min_max_normalize, IndexMap, NormalizationParams};

/// Dense training data: row-major features and integer classes.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<u32>,
    pub num_classes: usize,
}

impl TrainingSet {
    /// Extracts `features` and the derived target column from `table`.
    pub fn from_table(table: &FlowTable, features: &[String]) -> Result<Self> {
        let task = table
            .labels()
            .ok_or_else(|| Error::Schema("table has no derived target; run derive_labels".into()))?;
        let matrix = table.feature_matrix(features)?;
        if matrix.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Data("feature matrix holds missing values".into()));
        }
        Ok(TrainingSet {
            feature_names: features.to_vec(),
            features: matrix,
            targets: table.target()?.to_vec(),
            num_classes: task.num_classes(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub(crate) fn check_non_empty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Data("training set is empty".into()));
        }
        if let Some(&bad) = self.targets.iter().find(|&&t| t as usize >= self.num_classes) {
            return Err(Error::Data(format!("class {bad} out of range for {} classes", self.num_classes)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "DT")]
    DecisionTree,
    #[serde(rename = "RF")]
    RandomForest,
    #[serde(rename = "NB")]
    NaiveBayes,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [
        ClassifierKind::RandomForest,
        ClassifierKind::DecisionTree,
        ClassifierKind::NaiveBayes,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ClassifierKind::DecisionTree => "DT",
            ClassifierKind::RandomForest => "RF",
            ClassifierKind::NaiveBayes => "NB",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DT" | "TREE" | "DECISION-TREE" => Ok(ClassifierKind::DecisionTree),
            "RF" | "FOREST" | "RANDOM-FOREST" => Ok(ClassifierKind::RandomForest),
            "NB" | "BAYES" | "NAIVE-BAYES" => Ok(ClassifierKind::NaiveBayes),
            _ => Err(Error::Config(format!("unknown classifier {s:?} (expected DT, RF or NB)"))),
        }
    }
}

/// Classifier choice plus the hyperparameters of every classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    #[serde(default)]
    pub tree: TreeParams,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default = "default_smoothing")]
    pub nb_smoothing: f64,
}

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

impl ClassifierConfig {
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierConfig {
            kind,
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            nb_smoothing: DEFAULT_SMOOTHING,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelKind {
    Tree {
        tree: DecisionTree,
        boundaries: Vec<Vec<f64>>,
    },
    Forest {
        forest: RandomForest,
        boundaries: Vec<Vec<f64>>,
    },
    NaiveBayes(NbModel),
}

/// A trained classifier with the feature list and classes it was fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub feature_names: Vec<String>,
    pub task: LabelTask,
    /// Ranges fitted on the training table, applied before prediction when
    /// the model is used on raw tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationParams>,
    /// String dictionaries of categorical features indexed at training time.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub string_indexes: Vec<IndexMap>,
    pub model: ModelKind,
}

impl ClassifierModel {
    pub fn kind(&self) -> ClassifierKind {
        match self.model {
            ModelKind::Tree { .. } => ClassifierKind::DecisionTree,
            ModelKind::Forest { .. } => ClassifierKind::RandomForest,
            ModelKind::NaiveBayes(_) => ClassifierKind::NaiveBayes,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.task.num_classes()
    }

    pub fn predict(&self, row: &[f64]) -> Result<u32> {
        if row.len() != self.feature_names.len() {
            return Err(Error::Data(format!(
                "feature vector has {} values, model expects {}",
                row.len(),
                self.feature_names.len()
            )));
        }
        Ok(match &self.model {
            ModelKind::Tree { tree, .. } => tree.predict(row),
            ModelKind::Forest { forest, .. } => forest.predict(row, self.num_classes()),
            ModelKind::NaiveBayes(nb) => nb.predict(row),
        })
    }

    /// Predicts every row of `table`, applying the stored normalization first.
    pub fn predict_table(&self, table: &FlowTable) -> Result<Vec<u32>> {
        let indexed;
        let table = if self.string_indexes.is_empty() {
            table
        } else {
            indexed = apply_index_maps(table, &self.string_indexes)?;
            &indexed
        };
        let table = match &self.normalization {
            Some(params) => {
                let cols: Vec<String> = params
                    .columns
                    .iter()
                    .map(|c| c.column.clone())
                    .filter(|c| self.feature_names.contains(c))
                    .collect();
                min_max_normalize(table, &cols, Some(params))?.0
            }
            None => table.clone(),
        };
        let matrix = table.feature_matrix(&self.feature_names)?;
        matrix.iter().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ClassifierModel::from_json(&text)
    }
}

/// Trains the configured classifier on `set`.
pub fn train(config: &ClassifierConfig, set: &TrainingSet, task: &LabelTask, exec: &Executor) -> Result<ClassifierModel> {
    let model = match config.kind {
        ClassifierKind::DecisionTree => {
            let (tree, boundaries) = train_decision_tree(set, &config.tree, exec)?;
            ModelKind::Tree { tree, boundaries }
        }
        ClassifierKind::RandomForest => {
            let (forest, boundaries) = train_random_forest(set, &config.forest, exec)?;
            ModelKind::Forest { forest, boundaries }
        }
        ClassifierKind::NaiveBayes => ModelKind::NaiveBayes(train_naive_bayes(set, config.nb_smoothing)?),
    };
    Ok(ClassifierModel {
        feature_names: set.feature_names.clone(),
        task: task.clone(),
        normalization: None,
        string_indexes: Vec::new(),
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TaskKind;

    fn leaf_model(class: u32) -> ClassifierModel {
        ClassifierModel {
            feature_names: vec!["x".into()],
            task: LabelTask {
                variant: TaskKind::Binary,
                class_names: vec!["normal".into(), "attack".into()],
            },
            normalization: None,
            string_indexes: Vec::new(),
            model: ModelKind::Tree {
                tree: DecisionTree {
                    nodes: vec![TreeNode::Leaf {
                        class,
                        histogram: vec![0, 3],
                    }],
                },
                boundaries: vec![vec![]],
            },
        }
    }

    #[test]
    fn leaf_model_is_constant() {
        let m = leaf_model(1);
        assert_eq!(m.predict(&[0.0]).unwrap(), 1);
        assert_eq!(m.predict(&[0.9]).unwrap(), 1);
    }

    #[test]
    fn arity_mismatch_rejected() {
        assert!(leaf_model(0).predict(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn split_at_half_goes_left() {
        let mut m = leaf_model(0);
        m.model = ModelKind::Tree {
            tree: DecisionTree {
                nodes: vec![
                    TreeNode::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
                    TreeNode::Leaf { class: 0, histogram: vec![1, 0] },
                    TreeNode::Leaf { class: 1, histogram: vec![0, 1] },
                ],
            },
            boundaries: vec![vec![0.5]],
        };
        assert_eq!(m.predict(&[0.3]).unwrap(), 0);
        assert_eq!(m.predict(&[0.7]).unwrap(), 1);
        let back = ClassifierModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn classifier_names() {
        assert_eq!("rf".parse::<ClassifierKind>().unwrap(), ClassifierKind::RandomForest);
        assert_eq!(serde_json::to_string(&ClassifierKind::NaiveBayes).unwrap(), "\"NB\"");
        assert!("svm".parse::<ClassifierKind>().is_err());
    }
}
