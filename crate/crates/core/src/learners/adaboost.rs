//! Discrete AdaBoost over depth-1 stumps.

use serde::{Deserialize, Serialize};

use crate::binning::{BinnedMatrix, DEFAULT_MAX_BINS};
use crate::error::{Error, Result};
use crate::flowdata::FlowTable;

use super::{sigmoid, Learner};

/// Error floor used when a stump classifies every weighted row correctly.
pub const PERFECT_ERROR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostConfig {
    pub n_rounds: usize,
    /// Training stops after this many consecutive rounds with error >= 0.5.
    pub max_discards: usize,
    pub max_bins: usize,
    pub seed: u64,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            max_discards: 10,
            max_bins: DEFAULT_MAX_BINS,
            seed: 42,
        }
    }
}

/// `h(x) = polarity` when `x[feature] > threshold`, else `-polarity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: i8,
}

impl Stump {
    pub fn vote(&self, row: &[f64]) -> f64 {
        if row[self.feature] > self.threshold {
            self.polarity as f64
        } else {
            -(self.polarity as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub stumps: Vec<Stump>,
    pub alphas: Vec<f64>,
    pub n_features: usize,
}

impl AdaBoost {
    /// `sum_t alpha_t h_t(x)`.
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.stumps
            .iter()
            .zip(&self.alphas)
            .map(|(s, a)| a * s.vote(row))
            .sum()
    }
}

impl Learner for AdaBoost {
    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Logistic link on twice the margin (the margin estimates half the
    /// log-odds). Ranking score, not a calibrated probability.
    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(2.0 * self.margin(row))
    }
}

/// Per-round record of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaBoostTrace {
    pub errors: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Sum of sample weights after each renormalization.
    pub weight_sums: Vec<f64>,
    /// Training error of the ensemble after each accepted round.
    pub train_errors: Vec<f64>,
    pub discarded: usize,
    pub stopped_early: bool,
    pub final_weights: Vec<f64>,
}

/// `alpha = 0.5 * ln((1 - eps) / eps)`.
pub fn stage_weight(eps: f64) -> f64 {
    0.5 * ((1.0 - eps) / eps).ln()
}

pub fn train_adaboost(table: &FlowTable, config: &AdaBoostConfig) -> Result<AdaBoost> {
    Ok(train_adaboost_traced(table, config)?.0)
}

pub fn train_adaboost_traced(
    table: &FlowTable,
    config: &AdaBoostConfig,
) -> Result<(AdaBoost, AdaBoostTrace)> {
    let counts = table.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    let n = table.n_rows();
    let y: Vec<f64> = table.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let binned = BinnedMatrix::new(table, config.max_bins);
    let mut w = vec![1.0 / n as f64; n];
    let mut margins = vec![0.0f64; n];
    let mut model = AdaBoost {
        stumps: Vec::new(),
        alphas: Vec::new(),
        n_features: table.n_features(),
    };
    let mut trace = AdaBoostTrace::default();
    let mut consecutive_discards = 0;

    for _ in 0..config.n_rounds {
        let (stump, eps) = best_stump(&binned, &y, &w);
        trace.errors.push(eps);
        if eps >= 0.5 {
            trace.discarded += 1;
            consecutive_discards += 1;
            if consecutive_discards >= config.max_discards {
                trace.stopped_early = true;
                break;
            }
            continue;
        }
        consecutive_discards = 0;
        let perfect = eps <= PERFECT_ERROR_FLOOR;
        let alpha = stage_weight(eps.max(PERFECT_ERROR_FLOOR));
        let votes: Vec<f64> = table.rows().map(|r| stump.vote(r)).collect();
        for i in 0..n {
            w[i] *= (-alpha * y[i] * votes[i]).exp();
            margins[i] += alpha * votes[i];
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        trace.weight_sums.push(w.iter().sum());
        trace.alphas.push(alpha);
        let wrong = (0..n).filter(|&i| (margins[i] > 0.0) != (y[i] > 0.0)).count();
        trace.train_errors.push(wrong as f64 / n as f64);
        model.stumps.push(stump);
        model.alphas.push(alpha);
        if perfect {
            trace.stopped_early = true;
            break;
        }
    }
    trace.final_weights = w;
    Ok((model, trace))
}

/// Lowest weighted-error stump; ties keep the first (feature, bin, polarity).
fn best_stump(binned: &BinnedMatrix, y: &[f64], w: &[f64]) -> (Stump, f64) {
    let total_pos: f64 = y.iter().zip(w).filter(|(&yi, _)| yi > 0.0).map(|(_, &wi)| wi).sum();
    let total_neg: f64 = y.iter().zip(w).filter(|(&yi, _)| yi < 0.0).map(|(_, &wi)| wi).sum();
    let mut best = (
        Stump {
            feature: 0,
            threshold: f64::MAX,
            polarity: 1,
        },
        f64::INFINITY,
    );
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for j in 0..binned.n_features() {
        let nb = binned.n_bins(j);
        pos.clear();
        pos.resize(nb, 0.0);
        neg.clear();
        neg.resize(nb, 0.0);
        for (i, &code) in binned.column(j).iter().enumerate() {
            if y[i] > 0.0 {
                pos[code as usize] += w[i];
            } else {
                neg[code as usize] += w[i];
            }
        }
        let (mut left_pos, mut left_neg) = (0.0, 0.0);
        for b in 0..nb {
            left_pos += pos[b];
            left_neg += neg[b];
            // polarity +1: left says -1, right says +1
            let err_plus = left_pos + (total_neg - left_neg);
            let err_minus = left_neg + (total_pos - left_pos);
            let threshold = if b + 1 == nb {
                f64::MAX
            } else {
                binned.threshold(j, b)
            };
            for (err, polarity) in [(err_plus, 1i8), (err_minus, -1i8)] {
                if err < best.1 {
                    best = (
                        Stump {
                            feature: j,
                            threshold,
                            polarity,
                        },
                        err,
                    );
                }
            }
        }
    }
    (best.0, best.1.max(0.0))
}
