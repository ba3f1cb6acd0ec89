//! L2-regularized logistic regression fitted by damped Newton steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::FlowTable;
use crate::linalg;

use super::gbdt::logistic_loss;
use super::{sigmoid, Learner};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    /// Penalty `l2/2 * ||w||^2`; the intercept is not penalized.
    pub l2: f64,
    pub max_iter: usize,
    /// Euclidean norm of the gradient at which Newton stops.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2: 0.0,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// False when Newton stalled or the data are linearly separable with no
    /// penalty (the maximum-likelihood estimate does not exist).
    pub converged: bool,
}

impl LogisticRegression {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

impl Learner for LogisticRegression {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

/// Mean negative log-likelihood plus the L2 penalty. `params` holds the
/// weights followed by the intercept.
pub fn objective(table: &FlowTable, params: &[f64], l2: f64) -> f64 {
    let m = table.n_features();
    let (w, b) = params.split_at(m);
    let n = table.n_rows() as f64;
    let nll: f64 = table
        .rows()
        .zip(table.labels())
        .map(|(row, &y)| {
            let margin = b[0] + w.iter().zip(row).map(|(wj, xj)| wj * xj).sum::<f64>();
            logistic_loss(margin, y as f64)
        })
        .sum();
    nll / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Analytic gradient of [`objective`].
pub fn gradient(table: &FlowTable, params: &[f64], l2: f64) -> Vec<f64> {
    let m = table.n_features();
    let n = table.n_rows() as f64;
    let mut g = vec![0.0; m + 1];
    for (row, &y) in table.rows().zip(table.labels()) {
        let margin = params[m] + params[..m].iter().zip(row).map(|(w, x)| w * x).sum::<f64>();
        let r = sigmoid(margin) - y as f64;
        for j in 0..m {
            g[j] += r * row[j];
        }
        g[m] += r;
    }
    for j in 0..=m {
        g[j] /= n;
        if j < m {
            g[j] += l2 * params[j];
        }
    }
    g
}

fn hessian(table: &FlowTable, params: &[f64], l2: f64) -> DMatrix<f64> {
    let m = table.n_features();
    let n = table.n_rows() as f64;
    let mut h = DMatrix::<f64>::zeros(m + 1, m + 1);
    let mut z = vec![0.0; m + 1];
    for row in table.rows() {
        let margin = params[m] + params[..m].iter().zip(row).map(|(w, x)| w * x).sum::<f64>();
        let p = sigmoid(margin);
        let s = p * (1.0 - p);
        if s == 0.0 {
            continue;
        }
        z[..m].copy_from_slice(row);
        z[m] = 1.0;
        for a in 0..=m {
            let sa = s * z[a];
            if sa == 0.0 {
                continue;
            }
            for b in a..=m {
                h[(a, b)] += sa * z[b];
            }
        }
    }
    for a in 0..=m {
        for b in a..=m {
            h[(a, b)] /= n;
            h[(b, a)] = h[(a, b)];
        }
        if a < m {
            h[(a, a)] += l2;
        }
    }
    h
}

pub fn train_logistic_regression(table: &FlowTable, config: &LogisticConfig) -> Result<LogisticRegression> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let m = table.n_features();
    let mut params = vec![0.0; m + 1];
    let mut f = objective(table, &params, config.l2);
    let mut g = gradient(table, &params, config.l2);
    let mut g_norm = norm(&g);
    let mut iterations = 0;
    let mut stalled = false;
    while g_norm > config.tol && iterations < config.max_iter {
        let mut h = hessian(table, &params, config.l2);
        for a in 0..=m {
            h[(a, a)] += 1e-10;
        }
        let rhs = DVector::from_iterator(m + 1, g.iter().map(|v| -v));
        let dir = linalg::solve_symmetric(h, &rhs)?;
        let slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let trial: Vec<f64> = params.iter().zip(dir.iter()).map(|(p, d)| p + step * d).collect();
            let ft = objective(table, &trial, config.l2);
            if ft <= f + 1e-4 * step * slope {
                params = trial;
                f = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        g = gradient(table, &params, config.l2);
        g_norm = norm(&g);
        if !accepted {
            stalled = true;
            break;
        }
    }
    let (weights, intercept) = (params[..m].to_vec(), params[m]);
    let mut model = LogisticRegression {
        weights,
        intercept,
        iterations,
        gradient_norm: g_norm,
        converged: false,
    };
    let separable = config.l2 == 0.0
        && table
            .rows()
            .zip(table.labels())
            .all(|(row, &y)| (model.margin(row) > 0.0) == (y == 1));
    model.converged = g_norm <= config.tol && !stalled && !separable;
    if !model.converged {
        log::warn!(
            "logistic regression did not converge (gradient norm {:.3e}{})",
            g_norm,
            if separable { ", data linearly separable" } else { "" }
        );
    }
    Ok(model)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_features_balanced_labels() {
        let t = FlowTable::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]], &[0, 1, 0, 1]).unwrap();
        let model = train_logistic_regression(&t, &LogisticConfig::default()).unwrap();
        assert_eq!(model.intercept, 0.0);
        assert_eq!(model.predict_proba_row(&[0.0, 0.0]), 0.5);
        assert!(model.converged);
    }

    #[test]
    fn separable_data_flags_non_convergence() {
        let t = FlowTable::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], &[0, 0, 1, 1]).unwrap();
        let model = train_logistic_regression(&t, &LogisticConfig::default()).unwrap();
        assert!(!model.converged);
        let ridge = train_logistic_regression(
            &t,
            &LogisticConfig {
                l2: 0.1,
                ..LogisticConfig::default()
            },
        )
        .unwrap();
        assert!(ridge.converged);
        assert!(ridge.gradient_norm <= 1e-8);
    }

    #[test]
    fn overlapping_data_converges() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.13).sin(), (i as f64 * 0.29).cos()]).collect();
        let labels: Vec<u8> = (0..50).map(|i| ((i * 31) % 7 < 3) as u8).collect();
        let t = FlowTable::from_rows(&rows, &labels).unwrap();
        let model = train_logistic_regression(&t, &LogisticConfig::default()).unwrap();
        assert!(model.converged, "{model:?}");
        assert!(model.gradient_norm <= 1e-8);
    }
}
