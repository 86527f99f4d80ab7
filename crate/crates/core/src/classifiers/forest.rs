//! Random forest: bootstrap resamples, per-node feature subsets, majority
//! vote.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, BinnedFeatures, DecisionTree, FeatureSampling, TreeParams};
use super::TrainingSet;
use crate::error::{Error, Result};
use crate::partitioned_exec::Executor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSubset {
    /// `ceil(sqrt(d))` features per node.
    Sqrt,
    All,
}

impl FeatureSubset {
    pub fn size(self, features: usize) -> usize {
        match self {
            FeatureSubset::All => features,
            FeatureSubset::Sqrt => ((features as f64).sqrt().ceil() as usize).clamp(1, features.max(1)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub num_trees: usize,
    pub feature_subset: FeatureSubset,
    pub bootstrap: bool,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: 20,
            feature_subset: FeatureSubset::Sqrt,
            bootstrap: true,
            tree: TreeParams::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub seed: u64,
}

impl RandomForest {
    /// Majority vote; ties go to the lowest class index.
    pub fn predict(&self, row: &[f64], num_classes: usize) -> u32 {
        let mut votes = vec![0u32; num_classes.max(1)];
        for t in &self.trees {
            let c = t.predict(row) as usize;
            if c >= votes.len() {
                votes.resize(c + 1, 0);
            }
            votes[c] += 1;
        }
        vote(&votes)
    }
}

pub(crate) fn vote(votes: &[u32]) -> u32 {
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = i;
        }
    }
    best as u32
}

/// Per-tree generator: the forest seed with the tree index as stream.
fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

pub fn train_random_forest(
    set: &TrainingSet,
    params: &ForestParams,
    exec: &Executor,
) -> Result<(RandomForest, Vec<Vec<f64>>)> {
    if params.num_trees == 0 {
        return Err(Error::Config("num_trees must be at least 1".into()));
    }
    params.tree.validate()?;
    set.check_non_empty()?;
    let binned = BinnedFeatures::fit(set, params.tree.max_bins);
    let n = set.len();
    let d = set.num_features();
    let subset = params.feature_subset.size(d);
    let sampling = if subset >= d {
        FeatureSampling::All
    } else {
        FeatureSampling::Subset(subset)
    };
    let trees = (0..params.num_trees)
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let weights = if params.bootstrap {
                let mut w = vec![0u32; n];
                for _ in 0..n {
                    w[rng.gen_range(0..n)] += 1;
                }
                w
            } else {
                vec![1u32; n]
            };
            grow_tree(
                &binned,
                &set.targets,
                &weights,
                set.num_classes,
                &params.tree,
                sampling,
                Some(&mut rng),
                exec,
            )
        })
        .collect();
    Ok((
        RandomForest {
            trees,
            seed: params.seed,
        },
        binned.boundaries,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::tree::{train_decision_tree, TreeNode};

    fn stump(class: u32) -> DecisionTree {
        DecisionTree {
            nodes: vec![TreeNode::Leaf {
                class,
                histogram: vec![1, 1],
            }],
        }
    }

    #[test]
    fn majority_and_tie_rule() {
        let f = RandomForest {
            trees: vec![stump(0), stump(0), stump(1)],
            seed: 0,
        };
        assert_eq!(f.predict(&[0.0], 2), 0);
        let tie = RandomForest {
            trees: vec![stump(1), stump(0)],
            seed: 0,
        };
        assert_eq!(tie.predict(&[0.0], 2), 0);
    }

    #[test]
    fn sqrt_subset_rounds_up() {
        assert_eq!(FeatureSubset::Sqrt.size(10), 4);
        assert_eq!(FeatureSubset::Sqrt.size(16), 4);
        assert_eq!(FeatureSubset::Sqrt.size(1), 1);
    }

    #[test]
    fn single_full_tree_matches_decision_tree() {
        let features: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 7) as f64 / 6.0, (i % 5) as f64 / 4.0, (i % 3) as f64 / 2.0])
            .collect();
        let targets: Vec<u32> = (0..60).map(|i| ((i % 7) > 3 || (i % 3) == 0) as u32).collect();
        let set = TrainingSet {
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            features,
            targets,
            num_classes: 2,
        };
        let exec = Executor::default();
        let (tree, _) = train_decision_tree(&set, &TreeParams::default(), &exec).unwrap();
        let params = ForestParams {
            num_trees: 1,
            bootstrap: false,
            feature_subset: FeatureSubset::All,
            ..ForestParams::default()
        };
        let (forest, _) = train_random_forest(&set, &params, &exec).unwrap();
        assert_eq!(forest.trees[0], tree);
    }
}
