//! Histogram-based decision tree induction with Gini impurity.
//!
//! Features are discretized once into quantile bins. Each tree level is
//! grown from a single pass over the rows that aggregates integer
//! (node, feature, bin, class) counts through the partitioned executor, so
//! the chosen splits do not depend on the partition count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainingSet;
use crate::error::{Error, Result};
use crate::partitioned_exec::{merge_counts, Aggregator, Executor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Impurity {
    Gini,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub max_bins: usize,
    pub impurity: Impurity,
    pub min_instances_per_node: u64,
    pub min_info_gain: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 5,
            max_bins: 32,
            impurity: Impurity::Gini,
            min_instances_per_node: 1,
            min_info_gain: 0.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.max_depth > 30 {
            return Err(Error::Config(format!("max_depth {} outside 1..=30", self.max_depth)));
        }
        if self.max_bins < 2 || self.max_bins > usize::from(u16::MAX) {
            return Err(Error::Config(format!("max_bins {} outside 2..=65535", self.max_bins)));
        }
        if self.min_instances_per_node == 0 {
            return Err(Error::Config("min_instances_per_node must be positive".into()));
        }
        if self.min_info_gain.is_nan() || self.min_info_gain < 0.0 {
            return Err(Error::Config("min_info_gain must be non-negative".into()));
        }
        Ok(())
    }
}

/// `1 - sum p_i^2` of a class histogram.
pub fn gini_impurity(class_counts: &[u64]) -> Result<f64> {
    let total: u64 = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::Domain("gini impurity of an empty node".into()));
    }
    Ok(gini(class_counts, total))
}

fn gini(counts: &[u64], total: u64) -> f64 {
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

/// Split thresholds for one feature: midpoints between consecutive distinct
/// values when there are at most `max_bins` of them, otherwise up to
/// `max_bins - 1` thresholds at equally spaced quantiles.
pub fn compute_bin_boundaries(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= 1 || max_bins < 2 {
        return Vec::new();
    }
    let midpoint = |a: f64, b: f64| a + (b - a) / 2.0;
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut out: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for q in 1..max_bins {
        let v = sorted[(q * n / max_bins).min(n - 1)];
        // first distinct value above v
        let pos = distinct.partition_point(|&d| d <= v);
        if let Some(&next) = distinct.get(pos) {
            let b = midpoint(v, next);
            if out.last().is_none_or(|&last| b > last) {
                out.push(b);
            }
        }
    }
    out
}

/// Bin index of `v`: the number of thresholds strictly below it, so
/// `v <= boundaries[t]` exactly when the bin is at most `t`.
pub fn bin_of(boundaries: &[f64], v: f64) -> u16 {
    boundaries.partition_point(|&b| b < v) as u16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: u32,
        histogram: Vec<u64>,
    },
}

/// Arena of nodes; index 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Root-to-leaf descent; `value <= threshold` goes left.
    pub fn predict(&self, row: &[f64]) -> u32 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { class, .. } => return *class,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// Features discretized against per-feature thresholds.
#[derive(Clone, Debug)]
pub struct BinnedFeatures {
    pub boundaries: Vec<Vec<f64>>,
    /// Row-major bin indices.
    pub bins: Vec<Vec<u16>>,
}

impl BinnedFeatures {
    pub fn fit(set: &TrainingSet, max_bins: usize) -> Self {
        let d = set.num_features();
        let boundaries: Vec<Vec<f64>> = (0..d)
            .map(|f| {
                let col: Vec<f64> = set.features.iter().map(|r| r[f]).collect();
                compute_bin_boundaries(&col, max_bins)
            })
            .collect();
        let bins = set
            .features
            .iter()
            .map(|r| r.iter().zip(&boundaries).map(|(&v, b)| bin_of(b, v)).collect())
            .collect();
        BinnedFeatures { boundaries, bins }
    }

    pub fn num_features(&self) -> usize {
        self.boundaries.len()
    }
}

/// Which features a node may split on.
#[derive(Clone, Copy, Debug)]
pub(crate) enum FeatureSampling {
    All,
    Subset(usize),
}

const INACTIVE: u32 = u32::MAX;

/// Weighted (slot, feature, bin, class) counts for the nodes being split.
struct LevelHistogram<'a> {
    bins: &'a [Vec<u16>],
    targets: &'a [u32],
    weights: &'a [u32],
    slot_of_row: &'a [u32],
    slots: usize,
    features: usize,
    num_bins: usize,
    num_classes: usize,
}

impl LevelHistogram<'_> {
    fn index(&self, slot: usize, feature: usize, bin: usize, class: usize) -> usize {
        ((slot * self.features + feature) * self.num_bins + bin) * self.num_classes + class
    }
}

impl Aggregator for LevelHistogram<'_> {
    type Acc = Vec<u64>;

    fn zero(&self) -> Vec<u64> {
        vec![0; self.slots * self.features * self.num_bins * self.num_classes]
    }

    fn accumulate(&self, acc: &mut Vec<u64>, row: usize) {
        let slot = self.slot_of_row[row];
        let w = self.weights[row];
        if slot == INACTIVE || w == 0 {
            return;
        }
        let class = self.targets[row] as usize;
        for (f, &b) in self.bins[row].iter().enumerate() {
            let i = self.index(slot as usize, f, b as usize, class);
            acc[i] += u64::from(w);
        }
    }

    fn merge(&self, a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
        merge_counts(a, b)
    }
}

/// Weighted class counts of all rows.
struct ClassTotals<'a> {
    targets: &'a [u32],
    weights: &'a [u32],
    num_classes: usize,
}

impl Aggregator for ClassTotals<'_> {
    type Acc = Vec<u64>;

    fn zero(&self) -> Vec<u64> {
        vec![0; self.num_classes]
    }

    fn accumulate(&self, acc: &mut Vec<u64>, row: usize) {
        acc[self.targets[row] as usize] += u64::from(self.weights[row]);
    }

    fn merge(&self, a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
        merge_counts(a, b)
    }
}

fn majority(counts: &[u64]) -> u32 {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best as u32
}

struct Pending {
    node: usize,
    depth: usize,
    counts: Vec<u64>,
}

struct Split {
    feature: usize,
    bin: usize,
    left: Vec<u64>,
}

fn can_split(counts: &[u64], depth: usize, params: &TreeParams) -> bool {
    let total: u64 = counts.iter().sum();
    let nonzero = counts.iter().filter(|&&c| c > 0).count();
    depth < params.max_depth && nonzero > 1 && total >= 2 * params.min_instances_per_node
}

/// Grows one tree. `weights[r]` is the multiplicity of row `r` (0 drops it).
#[allow(clippy::too_many_arguments)]
pub(crate) fn grow_tree(
    binned: &BinnedFeatures,
    targets: &[u32],
    weights: &[u32],
    num_classes: usize,
    params: &TreeParams,
    sampling: FeatureSampling,
    mut rng: Option<&mut ChaCha8Rng>,
    exec: &Executor,
) -> DecisionTree {
    let rows = targets.len();
    let features = binned.num_features();
    let root_counts = exec.aggregate_rows(
        rows,
        &ClassTotals {
            targets,
            weights,
            num_classes,
        },
    );
    let mut nodes = vec![TreeNode::Leaf {
        class: majority(&root_counts),
        histogram: root_counts.clone(),
    }];
    let mut node_of_row: Vec<u32> = vec![0; rows];
    let mut frontier: Vec<Pending> = Vec::new();
    if features > 0 && can_split(&root_counts, 0, params) {
        frontier.push(Pending {
            node: 0,
            depth: 0,
            counts: root_counts,
        });
    }
    let num_bins = binned.boundaries.iter().map(|b| b.len() + 1).max().unwrap_or(1);

    while !frontier.is_empty() {
        let mut slot_of_node = vec![INACTIVE; nodes.len()];
        for (s, p) in frontier.iter().enumerate() {
            slot_of_node[p.node] = s as u32;
        }
        let slot_of_row: Vec<u32> = node_of_row
            .iter()
            .map(|&n| if n == INACTIVE { INACTIVE } else { slot_of_node[n as usize] })
            .collect();
        let agg = LevelHistogram {
            bins: &binned.bins,
            targets,
            weights,
            slot_of_row: &slot_of_row,
            slots: frontier.len(),
            features,
            num_bins,
            num_classes,
        };
        let hist = exec.aggregate_rows(rows, &agg);

        let mut next = Vec::new();
        // (node, feature, bin, left child, right child) for row routing
        let mut routes: Vec<Option<(usize, usize, usize, usize)>> = vec![None; frontier.len()];
        for (slot, pending) in frontier.into_iter().enumerate() {
            let candidates: Vec<usize> = match sampling {
                FeatureSampling::All => (0..features).collect(),
                FeatureSampling::Subset(m) => {
                    let rng = rng.as_deref_mut().expect("subset sampling needs an rng");
                    sample_features(features, m, rng)
                }
            };
            let Some(split) = best_split(&hist, &agg, slot, &candidates, binned, &pending.counts, params) else {
                continue;
            };
            let right: Vec<u64> = pending
                .counts
                .iter()
                .zip(&split.left)
                .map(|(p, l)| p - l)
                .collect();
            let left_id = nodes.len();
            let right_id = left_id + 1;
            for (counts, _) in [(&split.left, left_id), (&right, right_id)] {
                nodes.push(TreeNode::Leaf {
                    class: majority(counts),
                    histogram: counts.clone(),
                });
            }
            nodes[pending.node] = TreeNode::Split {
                feature: split.feature,
                threshold: binned.boundaries[split.feature][split.bin],
                left: left_id,
                right: right_id,
            };
            routes[slot] = Some((split.feature, split.bin, left_id, right_id));
            for (counts, id) in [(split.left, left_id), (right, right_id)] {
                if can_split(&counts, pending.depth + 1, params) {
                    next.push(Pending {
                        node: id,
                        depth: pending.depth + 1,
                        counts,
                    });
                }
            }
        }

        for (row, node) in node_of_row.iter_mut().enumerate() {
            let slot = slot_of_row[row];
            if slot == INACTIVE {
                continue;
            }
            *node = match routes[slot as usize] {
                Some((f, bin, l, r)) => {
                    if usize::from(binned.bins[row][f]) <= bin {
                        l as u32
                    } else {
                        r as u32
                    }
                }
                None => INACTIVE,
            };
        }
        frontier = next;
    }
    DecisionTree { nodes }
}

fn sample_features(features: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = m.clamp(1, features);
    let mut idx: Vec<usize> = (0..features).collect();
    for i in 0..m {
        let j = rng.gen_range(i..features);
        idx.swap(i, j);
    }
    idx.truncate(m);
    idx.sort_unstable();
    idx
}

/// Highest Gini gain over the candidate (feature, threshold) pairs; ties keep
/// the lowest feature, then the lowest threshold.
fn best_split(
    hist: &[u64],
    agg: &LevelHistogram<'_>,
    slot: usize,
    candidates: &[usize],
    binned: &BinnedFeatures,
    parent: &[u64],
    params: &TreeParams,
) -> Option<Split> {
    let total: u64 = parent.iter().sum();
    let parent_impurity = gini(parent, total);
    let classes = agg.num_classes;
    let mut best: Option<(f64, Split)> = None;
    let mut left = vec![0u64; classes];
    let mut right = vec![0u64; classes];
    for &f in candidates {
        let thresholds = binned.boundaries[f].len();
        left.iter_mut().for_each(|c| *c = 0);
        for bin in 0..thresholds {
            for (c, l) in left.iter_mut().enumerate() {
                *l += hist[agg.index(slot, f, bin, c)];
            }
            let nl: u64 = left.iter().sum();
            let nr = total - nl;
            if nl < params.min_instances_per_node || nr < params.min_instances_per_node || nl == 0 || nr == 0 {
                continue;
            }
            for (r, (p, l)) in right.iter_mut().zip(parent.iter().zip(&left)) {
                *r = p - l;
            }
            let gain = parent_impurity
                - (nl as f64 / total as f64) * gini(&left, nl)
                - (nr as f64 / total as f64) * gini(&right, nr);
            if gain < params.min_info_gain {
                continue;
            }
            if best.as_ref().is_none_or(|(g, _)| gain > *g) {
                best = Some((
                    gain,
                    Split {
                        feature: f,
                        bin,
                        left: left.clone(),
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Trains a single decision tree on every row and every feature.
pub fn train_decision_tree(set: &TrainingSet, params: &TreeParams, exec: &Executor) -> Result<(DecisionTree, Vec<Vec<f64>>)> {
    params.validate()?;
    set.check_non_empty()?;
    let binned = BinnedFeatures::fit(set, params.max_bins);
    let weights = vec![1u32; set.len()];
    let tree = grow_tree(
        &binned,
        &set.targets,
        &weights,
        set.num_classes,
        params,
        FeatureSampling::All,
        None,
        exec,
    );
    Ok((tree, binned.boundaries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: Vec<Vec<f64>>, targets: Vec<u32>, classes: usize) -> TrainingSet {
        let d = rows.first().map_or(0, Vec::len);
        TrainingSet {
            feature_names: (0..d).map(|i| format!("f{i}")).collect(),
            features: rows,
            targets,
            num_classes: classes,
        }
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[10, 0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[5, 5]).unwrap(), 0.5);
        assert!((gini_impurity(&[1, 2, 3]).unwrap() - 22.0 / 36.0).abs() < 1e-12);
        assert!(gini_impurity(&[0, 0]).is_err());
    }

    #[test]
    fn boundary_examples() {
        assert_eq!(compute_bin_boundaries(&[0.0, 1.0, 1.0, 0.0], 32), vec![0.5]);
        assert!(compute_bin_boundaries(&[3.0; 5], 32).is_empty());
        let uniform: Vec<f64> = (0..100).map(f64::from).collect();
        let b = compute_bin_boundaries(&uniform, 4);
        assert_eq!(b, vec![25.5, 50.5, 75.5]);
    }

    #[test]
    fn single_class_is_root_leaf() {
        let s = set(vec![vec![0.1], vec![0.9]], vec![1, 1], 2);
        let (tree, _) = train_decision_tree(&s, &TreeParams::default(), &Executor::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict(&[0.5]), 1);
    }

    #[test]
    fn one_split_separates() {
        let s = set(vec![vec![0.0], vec![1.0]], vec![0, 1], 2);
        let params = TreeParams { max_depth: 1, ..TreeParams::default() };
        let (tree, _) = train_decision_tree(&s, &params, &Executor::default()).unwrap();
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.predict(&[0.0]), 0);
        assert_eq!(tree.predict(&[1.0]), 1);
        assert_eq!(tree.predict(&[0.3]), 0);
    }

    #[test]
    fn xor_needs_depth_two() {
        let s = set(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
            2,
        );
        let params = TreeParams { max_depth: 2, ..TreeParams::default() };
        let (tree, _) = train_decision_tree(&s, &params, &Executor::default()).unwrap();
        for (row, &y) in s.features.iter().zip(&s.targets) {
            assert_eq!(tree.predict(row), y);
        }
    }

    #[test]
    fn empty_training_set_is_error() {
        let s = set(Vec::new(), Vec::new(), 2);
        assert!(train_decision_tree(&s, &TreeParams::default(), &Executor::default()).is_err());
    }
}
