//! Second-order gradient-boosted regression trees on the logistic loss.
//!
//! Leaves take the Newton value `-G / (H + l2)` over the gradient and hessian
//! sums of the rows they hold; splits maximize the matching gain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::binning::{BinnedMatrix, DEFAULT_MAX_BINS};
use crate::error::{Error, Result};
use crate::flowdata::FlowTable;
use crate::rng::{self, Purpose};

use super::{sigmoid, Learner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostLoss {
    Logistic,
    /// Squared error on the 0/1 label; a debugging aid.
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub l2: f64,
    pub min_child_weight: f64,
    /// Fraction of features offered to each tree.
    pub colsample: f64,
    pub max_bins: usize,
    pub loss: BoostLoss,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: 6,
            l2: 1.0,
            min_child_weight: 1.0,
            colsample: 1.0,
            max_bins: DEFAULT_MAX_BINS,
            loss: BoostLoss::Logistic,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    /// Already scaled by the learning rate.
    Leaf { value: f64 },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegNode>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
    pub loss: BoostLoss,
    pub n_features: usize,
}

impl GradientBoosting {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

impl Learner for GradientBoosting {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        let m = self.margin(row);
        match self.loss {
            BoostLoss::Logistic => sigmoid(m),
            BoostLoss::Squared => m.clamp(0.0, 1.0),
        }
    }
}

/// Negative log-likelihood of label `y` at margin `m`.
pub fn logistic_loss(margin: f64, y: f64) -> f64 {
    // log(1 + e^m) - y m, evaluated stably
    let softplus = if margin > 0.0 {
        margin + (-margin).exp().ln_1p()
    } else {
        margin.exp().ln_1p()
    };
    softplus - y * margin
}

/// First and second derivative of [`logistic_loss`] in the margin.
pub fn logistic_grad_hess(margin: f64, y: f64) -> (f64, f64) {
    let p = sigmoid(margin);
    (p - y, p * (1.0 - p))
}

pub fn leaf_value(grad_sum: f64, hess_sum: f64, l2: f64) -> f64 {
    -grad_sum / (hess_sum + l2)
}

fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, l2: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + l2);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr))
}

pub fn train_gradient_boosted_trees(table: &FlowTable, config: &GbdtConfig) -> Result<GradientBoosting> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let counts = table.class_counts();
    if config.loss == BoostLoss::Logistic && (counts[0] == 0 || counts[1] == 0) {
        return Err(Error::SingleClass);
    }
    let n = table.n_rows();
    let y: Vec<f64> = table.labels().iter().map(|&l| l as f64).collect();
    let prior = counts[1] as f64 / n as f64;
    let base_score = match config.loss {
        BoostLoss::Logistic => (prior / (1.0 - prior)).ln(),
        BoostLoss::Squared => prior,
    };
    let binned = BinnedMatrix::new(table, config.max_bins);
    let m = table.n_features();
    let n_cols = ((config.colsample.clamp(0.0, 1.0) * m as f64).round() as usize).clamp(1, m.max(1));
    let mut margins = vec![base_score; n];
    let mut trees = Vec::with_capacity(config.n_rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for round in 0..config.n_rounds {
        for i in 0..n {
            let (g, h) = match config.loss {
                BoostLoss::Logistic => logistic_grad_hess(margins[i], y[i]),
                BoostLoss::Squared => (margins[i] - y[i], 1.0),
            };
            grad[i] = g;
            hess[i] = h;
        }
        let features = if n_cols >= m {
            (0..m).collect()
        } else {
            let mut rng = rng::stream(config.seed, Purpose::Boosting, round as u64);
            let mut pool: Vec<usize> = (0..m).collect();
            for i in 0..n_cols {
                let j = rng.random_range(i..m);
                pool.swap(i, j);
            }
            let mut f = pool[..n_cols].to_vec();
            f.sort_unstable();
            f
        };
        let tree = grow(&binned, &grad, &hess, &features, config);
        for (i, row) in table.rows().enumerate() {
            margins[i] += tree.predict(row);
        }
        trees.push(tree);
    }
    Ok(GradientBoosting {
        base_score,
        trees,
        loss: config.loss,
        n_features: m,
    })
}

fn grow(
    binned: &BinnedMatrix,
    grad: &[f64],
    hess: &[f64],
    features: &[usize],
    config: &GbdtConfig,
) -> RegressionTree {
    let mut nodes = vec![RegNode::Leaf { value: 0.0 }];
    let rows: Vec<usize> = (0..binned.n_rows()).collect();
    let mut stack = vec![(0usize, rows, 0usize)];
    let mut hist: Vec<(f64, f64)> = Vec::new();
    while let Some((slot, rows, depth)) = stack.pop() {
        let g: f64 = rows.iter().map(|&i| grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| hess[i]).sum();
        let leaf = RegNode::Leaf {
            value: config.learning_rate * leaf_value(g, h, config.l2),
        };
        if depth >= config.max_depth || rows.len() < 2 {
            nodes[slot] = leaf;
            continue;
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for &j in features {
            let nb = binned.n_bins(j);
            if nb < 2 {
                continue;
            }
            hist.clear();
            hist.resize(nb, (0.0, 0.0));
            let col = binned.column(j);
            for &i in &rows {
                let e = &mut hist[col[i] as usize];
                e.0 += grad[i];
                e.1 += hess[i];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for (b, &(gb, hb)) in hist.iter().enumerate().take(nb - 1) {
                gl += gb;
                hl += hb;
                let (gr, hr) = (g - gl, h - hl);
                if hl < config.min_child_weight || hr < config.min_child_weight {
                    continue;
                }
                let gain = split_gain(gl, hl, gr, hr, config.l2);
                if gain > 1e-12 && best.is_none_or(|(_, _, s)| gain > s) {
                    best = Some((j, b, gain));
                }
            }
        }
        let Some((feature, bin, _)) = best else {
            nodes[slot] = leaf;
            continue;
        };
        let col = binned.column(feature);
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] as usize <= bin);
        if l.is_empty() || r.is_empty() {
            nodes[slot] = leaf;
            continue;
        }
        let left = nodes.len();
        nodes.push(RegNode::Leaf { value: 0.0 });
        nodes.push(RegNode::Leaf { value: 0.0 });
        nodes[slot] = RegNode::Split {
            feature,
            threshold: binned.threshold(feature, bin),
            left,
            right: left + 1,
        };
        stack.push((left + 1, r, depth + 1));
        stack.push((left, l, depth + 1));
    }
    RegressionTree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FlowTable {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0, ((i * 7) % 11) as f64]).collect();
        let labels: Vec<u8> = (0..40).map(|i| (i >= 26 || i % 9 == 0) as u8).collect();
        FlowTable::from_rows(&rows, &labels).unwrap()
    }

    #[test]
    fn zero_rounds_predicts_prior() {
        let t = toy();
        let model = train_gradient_boosted_trees(
            &t,
            &GbdtConfig {
                n_rounds: 0,
                ..GbdtConfig::default()
            },
        )
        .unwrap();
        let prior = t.class_counts()[1] as f64 / t.n_rows() as f64;
        for row in t.rows() {
            assert!((model.predict_proba_row(row) - prior).abs() < 1e-12);
        }
    }

    #[test]
    fn squared_depth_zero_round_is_scaled_mean_residual() {
        let t = toy();
        let cfg = GbdtConfig {
            n_rounds: 1,
            max_depth: 0,
            l2: 0.0,
            learning_rate: 0.3,
            loss: BoostLoss::Squared,
            ..GbdtConfig::default()
        };
        let model = train_gradient_boosted_trees(&t, &cfg).unwrap();
        let mean_y = t.class_counts()[1] as f64 / t.n_rows() as f64;
        let mean_residual = t.labels().iter().map(|&l| l as f64 - mean_y).sum::<f64>() / t.n_rows() as f64;
        match &model.trees[0].nodes[..] {
            [RegNode::Leaf { value }] => assert!((value - 0.3 * mean_residual).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn leaf_value_by_hand() {
        // four rows at margin 0 (p = 0.5): labels 1,1,1,0
        let ys = [1.0, 1.0, 1.0, 0.0];
        let (mut g, mut h) = (0.0, 0.0);
        for y in ys {
            let (gi, hi) = logistic_grad_hess(0.0, y);
            g += gi;
            h += hi;
        }
        // G = 3(-0.5) + 0.5 = -1, H = 4(0.25) = 1
        assert_eq!((g, h), (-1.0, 1.0));
        assert_eq!(leaf_value(g, h, 1.0), 0.5);
    }

    #[test]
    fn boosting_fits_training_data() {
        let t = toy();
        let model = train_gradient_boosted_trees(&t, &GbdtConfig::default()).unwrap();
        let acc = model
            .predict(&t)
            .iter()
            .zip(t.labels())
            .filter(|(a, b)| a == b)
            .count() as f64
            / t.n_rows() as f64;
        assert!(acc > 0.95, "{acc}");
    }

    #[test]
    fn loss_is_stable_at_extreme_margins() {
        assert!(logistic_loss(800.0, 1.0).abs() < 1e-12);
        assert!((logistic_loss(-800.0, 1.0) - 800.0).abs() < 1e-9);
    }
}
