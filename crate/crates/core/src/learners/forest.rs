//! Random forest: bagged CART trees with per-split feature subsampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::{BinnedMatrix, DEFAULT_MAX_BINS};
use crate::error::{Error, Result};
use crate::flowdata::FlowTable;
use crate::rng::{self, Purpose};

use super::tree::{build_tree, DecisionTree, MaxFeatures, TreeConfig};
use super::Learner;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub max_bins: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 16,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            max_bins: DEFAULT_MAX_BINS,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
}

impl Learner for RandomForest {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba_row(row)).sum();
        sum / self.trees.len() as f64
    }
}

pub fn train_random_forest(table: &FlowTable, config: &ForestConfig) -> Result<RandomForest> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    if config.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
    }
    let binned = BinnedMatrix::new(table, config.max_bins);
    let tree_config = TreeConfig {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        max_features: config.max_features,
        max_bins: config.max_bins,
        seed: config.seed,
    };
    let n = table.n_rows();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(config.seed, Purpose::Forest, t as u64);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            build_tree(&binned, table.labels(), rows, &tree_config, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        trees,
        n_features: table.n_features(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::train_decision_tree;

    fn toy() -> FlowTable {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let x = i as f64 / 60.0;
                vec![x, (x * 7.0).sin().abs(), ((i * 13) % 17) as f64 / 17.0]
            })
            .collect();
        let labels: Vec<u8> = rows.iter().map(|r| (r[0] + 0.3 * r[1] > 0.55) as u8).collect();
        FlowTable::from_rows(&rows, &labels).unwrap()
    }

    #[test]
    fn single_unbagged_tree_reduces_to_decision_tree() {
        let t = toy();
        let forest = train_random_forest(
            &t,
            &ForestConfig {
                n_trees: 1,
                bootstrap: false,
                max_features: MaxFeatures::All,
                max_depth: 10,
                min_samples_leaf: 5,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let tree = train_decision_tree(&t, &TreeConfig::default()).unwrap();
        assert_eq!(forest.trees[0], tree);
        assert_eq!(forest.predict_proba(&t), tree.predict_proba(&t));
    }

    #[test]
    fn probability_is_mean_of_trees() {
        let t = toy();
        let f = train_random_forest(
            &t,
            &ForestConfig {
                n_trees: 7,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        for row in t.rows() {
            let p = f.predict_proba_row(row);
            let mean = f.trees.iter().map(|tr| tr.predict_proba_row(row)).sum::<f64>() / 7.0;
            assert_eq!(p, mean);
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn seeded_forest_is_reproducible() {
        let t = toy();
        let cfg = ForestConfig {
            n_trees: 25,
            seed: 11,
            ..ForestConfig::default()
        };
        let a = train_random_forest(&t, &cfg).unwrap();
        let b = train_random_forest(&t, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.predict(&t), b.predict(&t));
    }
}
