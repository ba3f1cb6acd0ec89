//! CART classification trees (Gini impurity).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binning::{BinnedMatrix, DEFAULT_MAX_BINS};
use crate::error::{Error, Result};
use crate::flowdata::FlowTable;

use super::Learner;

/// Features considered at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt().round() as usize,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub max_bins: usize,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 10,
            min_samples_leaf: 5,
            max_features: MaxFeatures::All,
            max_bins: DEFAULT_MAX_BINS,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        /// Training rows per class reaching this leaf.
        counts: [usize; 2],
        /// Probability of class 1.
        proba: f64,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Arena; the root is node 0.
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

impl DecisionTree {
    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Leaf index reached by `row`.
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Training rows that reached node `i`.
    pub fn node_samples(&self, i: usize) -> usize {
        match &self.nodes[i] {
            TreeNode::Leaf { counts, .. } => counts[0] + counts[1],
            TreeNode::Split { n_samples, .. } => *n_samples,
        }
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

impl Learner for DecisionTree {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        match &self.nodes[self.leaf_of(row)] {
            TreeNode::Leaf { proba, .. } => *proba,
            TreeNode::Split { .. } => unreachable!(),
        }
    }
}

pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[1] as f64 / n;
    2.0 * p * (1.0 - p)
}

pub fn train_decision_tree(table: &FlowTable, config: &TreeConfig) -> Result<DecisionTree> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let binned = BinnedMatrix::new(table, config.max_bins);
    let rows: Vec<usize> = (0..table.n_rows()).collect();
    let mut rng = crate::rng::stream(config.seed, crate::rng::Purpose::Forest, u64::MAX);
    Ok(build_tree(&binned, table.labels(), rows, config, &mut rng))
}

/// Best split of one node: `(feature, bin, weighted_gini)`.
fn best_split(
    binned: &BinnedMatrix,
    labels: &[u8],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, usize, f64)> {
    let n = rows.len();
    let mut best: Option<(usize, usize, f64)> = None;
    let mut hist: Vec<[usize; 2]> = Vec::new();
    for &j in features {
        let nb = binned.n_bins(j);
        if nb < 2 {
            continue;
        }
        hist.clear();
        hist.resize(nb, [0, 0]);
        let col = binned.column(j);
        for &i in rows {
            hist[col[i] as usize][labels[i] as usize] += 1;
        }
        let total = [
            hist.iter().map(|h| h[0]).sum::<usize>(),
            hist.iter().map(|h| h[1]).sum::<usize>(),
        ];
        let mut left = [0usize; 2];
        for (b, h) in hist.iter().enumerate().take(nb - 1) {
            left[0] += h[0];
            left[1] += h[1];
            let n_left = left[0] + left[1];
            let n_right = n - n_left;
            // empty bins repeat the previous candidate
            if h[0] + h[1] == 0 || n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let score = (n_left as f64 * gini(left) + n_right as f64 * gini(right)) / n as f64;
            if best.is_none_or(|(_, _, s)| score < s) {
                best = Some((j, b, score));
            }
        }
    }
    best
}

/// Grows a tree over `rows` (duplicates allowed, for bootstrap samples).
pub(crate) fn build_tree(
    binned: &BinnedMatrix,
    labels: &[u8],
    rows: Vec<usize>,
    config: &TreeConfig,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let m = binned.n_features();
    let k = config.max_features.resolve(m);
    let min_leaf = config.min_samples_leaf.max(1);
    let mut nodes: Vec<TreeNode> = Vec::new();
    // (node slot, rows, depth)
    let mut stack = vec![(0usize, rows, 0usize)];
    nodes.push(TreeNode::Leaf {
        counts: [0, 0],
        proba: 0.0,
    });
    while let Some((slot, rows, depth)) = stack.pop() {
        let ones = rows.iter().filter(|&&i| labels[i] == 1).count();
        let counts = [rows.len() - ones, ones];
        let leaf = TreeNode::Leaf {
            counts,
            proba: if rows.is_empty() {
                0.0
            } else {
                ones as f64 / rows.len() as f64
            },
        };
        if depth >= config.max_depth || counts[0] == 0 || counts[1] == 0 || rows.len() < 2 * min_leaf {
            nodes[slot] = leaf;
            continue;
        }
        let features = sample_features(m, k, rng);
        let Some((feature, bin, _)) = best_split(binned, labels, &rows, &features, min_leaf) else {
            nodes[slot] = leaf;
            continue;
        };
        let col = binned.column(feature);
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] as usize <= bin);
        let left = nodes.len();
        let right = left + 1;
        let placeholder = TreeNode::Leaf {
            counts: [0, 0],
            proba: 0.0,
        };
        nodes.push(placeholder.clone());
        nodes.push(placeholder);
        nodes[slot] = TreeNode::Split {
            feature,
            threshold: binned.threshold(feature, bin),
            left,
            right,
            n_samples: rows.len(),
        };
        stack.push((right, r, depth + 1));
        stack.push((left, l, depth + 1));
    }
    DecisionTree { nodes, n_features: m }
}

/// `k` distinct features in ascending order; all of them when `k == m`.
fn sample_features(m: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if k >= m {
        return (0..m).collect();
    }
    let mut pool: Vec<usize> = (0..m).collect();
    for i in 0..k {
        let j = rng.random_range(i..m);
        pool.swap(i, j);
    }
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable();
    chosen
}
