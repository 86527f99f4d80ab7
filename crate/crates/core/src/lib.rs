//! Flow-record intrusion detection pipeline.
//!
//! Reads BoT-IoT style CSV shards into a columnar [`FlowTable`], cleans and
//! undersamples them, ranks features with a chi-square test, trains decision
//! tree, random forest or multinomial naive Bayes classifiers on a
//! partitioned executor, and scores them with per-class and macro F1.
//!
//! ```no_run
//! use flowforge::{run_experiment, ClassifierKind, ExperimentConfig, TaskKind};
//!
//! let config = ExperimentConfig::new(vec!["flows.csv".into()], TaskKind::Binary, ClassifierKind::RandomForest);
//! let report = run_experiment(&config)?;
//! println!("{}", report.summary());
//! # Ok::<(), flowforge::Error>(())
//! ```

pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod feature_select;
pub mod ingest;
pub mod partitioned_exec;
pub mod preprocess;
pub mod runner;
pub mod synth;

pub use classifiers::{train, ClassifierConfig, ClassifierKind, ClassifierModel, TrainingSet};
pub use dataset::{
    class_counts, derive_labels, derive_labels_with, ClassCounts, ColumnKind, ColumnSchema, FlowTable, LabelTask,
    Schema, TaskKind, TARGET_COLUMN,
};
pub use error::{Error, Result};
pub use evaluate::{confusion_matrix, evaluate_model, macro_f1, ConfusionMatrix, MetricsReport};
pub use feature_select::{chi_square_statistic, select_top_k, ChiSqRanking, FeatureCount};
pub use ingest::{read_csv, union_shards, write_csv, ShardManifest};
pub use partitioned_exec::{partition, Aggregator, Executor, PartitionedTable};
pub use preprocess::{
    drop_duplicates, drop_missing, index_strings, make_folds, min_max_normalize, split_train_test, undersample,
    MissingReport, SamplingPlan,
};
pub use runner::{run_experiment, run_matrix, ExperimentConfig, MatrixAxes, RunReport};
pub use synth::{generate_synthetic, SyntheticSpec};
