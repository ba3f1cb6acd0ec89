//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::FlowTable;

use super::{sigmoid, Learner};

pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub log_priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

impl NaiveBayes {
    /// `ln P(c) + sum_j ln N(x_j; mu_cj, var_cj)`.
    pub fn log_joint(&self, row: &[f64], class: usize) -> f64 {
        let mut s = self.log_priors[class];
        for ((x, mu), var) in row.iter().zip(&self.means[class]).zip(&self.variances[class]) {
            s -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mu).powi(2) / var);
        }
        s
    }
}

impl Learner for NaiveBayes {
    fn n_features(&self) -> usize {
        self.means[0].len()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.log_joint(row, 1) - self.log_joint(row, 0))
    }
}

pub fn train_naive_bayes(table: &FlowTable) -> Result<NaiveBayes> {
    let counts = table.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    let m = table.n_features();
    let mut means = [vec![0.0; m], vec![0.0; m]];
    let mut variances = [vec![0.0; m], vec![0.0; m]];
    for (row, &y) in table.rows().zip(table.labels()) {
        for j in 0..m {
            means[y as usize][j] += row[j];
        }
    }
    for c in 0..2 {
        means[c].iter_mut().for_each(|v| *v /= counts[c] as f64);
    }
    for (row, &y) in table.rows().zip(table.labels()) {
        let c = y as usize;
        for j in 0..m {
            variances[c][j] += (row[j] - means[c][j]).powi(2);
        }
    }
    for c in 0..2 {
        variances[c]
            .iter_mut()
            .for_each(|v| *v = (*v / counts[c] as f64).max(VARIANCE_FLOOR));
    }
    let n = table.n_rows() as f64;
    Ok(NaiveBayes {
        log_priors: [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()],
        means,
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirrored_classes_give_half_at_origin() {
        let t = FlowTable::from_rows(&[vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]], &[0, 0, 1, 1]).unwrap();
        let nb = train_naive_bayes(&t).unwrap();
        assert_eq!(nb.predict_proba_row(&[0.0]), 0.5);
        assert_eq!(nb.predict_row(&[0.0]), 0);
    }

    #[test]
    fn separated_blobs_are_fit_exactly() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![if i < 5 { i as f64 * 0.1 } else { 5.0 + i as f64 * 0.1 }]).collect();
        let labels: Vec<u8> = (0..10).map(|i| (i >= 5) as u8).collect();
        let t = FlowTable::from_rows(&rows, &labels).unwrap();
        assert_eq!(train_naive_bayes(&t).unwrap().predict(&t), labels);
    }

    #[test]
    fn six_row_posterior_by_hand() {
        let xs = [0.0, 1.0, 2.0, 3.0, 5.0, 7.0];
        let ys = [0u8, 0, 0, 1, 1, 1];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let nb = train_naive_bayes(&FlowTable::from_rows(&rows, &ys).unwrap()).unwrap();
        // class 0: mean 1, var 2/3; class 1: mean 5, var 8/3; priors 1/2
        let density = |x: f64, mu: f64, var: f64| {
            (-(x - mu) * (x - mu) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        let x = 2.5;
        let p0 = 0.5 * density(x, 1.0, 2.0 / 3.0);
        let p1 = 0.5 * density(x, 5.0, 8.0 / 3.0);
        assert!((nb.predict_proba_row(&[x]) - p1 / (p0 + p1)).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_uses_variance_floor() {
        let t = FlowTable::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.1], vec![1.0, 0.9], vec![1.0, 1.0]], &[0, 0, 1, 1]).unwrap();
        let nb = train_naive_bayes(&t).unwrap();
        assert_eq!(nb.variances[0][0], VARIANCE_FLOOR);
        assert!(nb.predict_proba_row(&[1.0, 0.95]) > 0.5);
    }
}
