//! RBF-kernel support vector classifier.
//!
//! The dual is solved by SMO with second-order working-set selection; the
//! solver stops once the maximal KKT violation `m(a) - M(a)` is at most `tol`.
//! Probabilities come from a Platt sigmoid fitted on the training decision
//! values.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::{self, FlowTable, SplitSpec};

use super::Learner;

/// Rows above which training requires an explicit subsample.
pub const DEFAULT_MAX_TRAIN_ROWS: usize = 5000;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    /// RBF width; `None` means `1 / n_features`.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub max_train_rows: usize,
    /// Take a stratified subsample of `max_train_rows` rows instead of
    /// failing on larger inputs.
    pub auto_subsample: bool,
    pub cache_mb: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter: 1_000_000,
            max_train_rows: DEFAULT_MAX_TRAIN_ROWS,
            auto_subsample: false,
            cache_mb: 256,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub platt_a: f64,
    pub platt_b: f64,
    pub n_features: usize,
    pub converged: bool,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl Svm {
    /// `f(x) = sum_i alpha_i y_i K(x_i, x) + b`.
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * rbf(sv, row, self.gamma))
            .sum::<f64>()
            + self.bias
    }
}

impl Learner for Svm {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        platt_probability(self.decision(row), self.platt_a, self.platt_b)
    }
}

/// Raw dual solution over every training row.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `m(a) - M(a)` at exit.
    pub kkt_gap: f64,
}

/// Dual objective `sum a - 1/2 sum_ij a_i a_j y_i y_j K_ij` (to be maximized).
pub fn dual_objective(rows: &[&[f64]], y: &[f64], alphas: &[f64], gamma: f64) -> f64 {
    let n = rows.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alphas[i] * alphas[j] * y[i] * y[j] * rbf(rows[i], rows[j], gamma);
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

struct KernelCache<'a> {
    rows: &'a [&'a [f64]],
    gamma: f64,
    cached: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(rows: &'a [&'a [f64]], gamma: f64, cache_mb: usize) -> Self {
        let n = rows.len();
        let capacity = ((cache_mb << 20) / (8 * n.max(1))).max(2);
        Self {
            rows,
            gamma,
            cached: vec![None; n],
            order: VecDeque::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.cached[i].is_none() {
            if self.order.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.cached[old] = None;
                }
            }
            let ri = self.rows[i];
            let k: Vec<f64> = self.rows.iter().map(|r| rbf(ri, r, self.gamma)).collect();
            self.cached[i] = Some(k);
            self.order.push_back(i);
        }
        self.cached[i].as_deref().unwrap()
    }
}

/// SMO on the RBF dual with box `[0, c]` and `sum a_i y_i = 0`.
pub fn solve_smo(rows: &[&[f64]], y: &[f64], c: f64, gamma: f64, tol: f64, max_iter: usize, cache_mb: usize) -> SmoSolution {
    let n = rows.len();
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let mut cache = KernelCache::new(rows, gamma, cache_mb);
    let diag = vec![1.0f64; n]; // K(x, x) for RBF
    let is_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let is_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);
    let mut iterations = 0;
    let mut gap;
    loop {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if is_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            if is_low(alpha[t], y[t]) {
                gmin = gmin.min(-y[t] * grad[t]);
            }
        }
        gap = gmax - gmin;
        if i_sel == usize::MAX || gap <= tol || iterations >= max_iter {
            break;
        }
        let i = i_sel;
        let ki: Vec<f64> = cache.row(i).to_vec();
        // j: second-order choice among I_low
        let mut best = f64::INFINITY;
        let mut j_sel = usize::MAX;
        for t in 0..n {
            if !is_low(alpha[t], y[t]) {
                continue;
            }
            let b = gmax + y[t] * grad[t];
            if b > 0.0 {
                let mut a = diag[i] + diag[t] - 2.0 * ki[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j_sel = t;
                }
            }
        }
        if j_sel == usize::MAX {
            break;
        }
        let j = j_sel;
        let kj: Vec<f64> = cache.row(j).to_vec();
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = diag[i] + diag[j] - 2.0 * ki[j];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            // Q_ti = y_t y_i K_ti
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
        iterations += 1;
    }

    // bias = -rho
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let (mut n_free, mut sum_free) = (0usize, 0.0f64);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    SmoSolution {
        alphas: alpha,
        bias: -rho,
        iterations,
        converged: gap <= tol,
        kkt_gap: gap,
    }
}

/// `P(y = 1 | f) = 1 / (1 + exp(a f + b))`, evaluated stably.
pub fn platt_probability(decision: f64, a: f64, b: f64) -> f64 {
    let z = decision * a + b;
    if z >= 0.0 {
        (-z).exp() / (1.0 + (-z).exp())
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Platt sigmoid fit by Newton's method with backtracking (Lin, Lin and
/// Weng's formulation, with the smoothed targets).
pub fn fit_platt(decisions: &[f64], labels: &[u8]) -> (f64, f64) {
    let prior1 = labels.iter().filter(|&&l| l == 1).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|&l| if l == 1 { hi } else { lo }).collect();
    let (min_step, sigma, eps) = (1e-10, 1e-12, 1e-5);
    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let value = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let mut fval = value(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (&f, &ti) in decisions.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = value(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            break;
        }
    }
    (a, b)
}

pub fn train_svm_rbf(table: &FlowTable, config: &SvmConfig) -> Result<Svm> {
    let counts = table.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    if !(config.c > 0.0) {
        return Err(Error::InvalidConfig(format!("C must be positive, got {}", config.c)));
    }
    let sub;
    let table = if table.n_rows() > config.max_train_rows {
        if !config.auto_subsample {
            return Err(Error::TrainingSetTooLarge {
                rows: table.n_rows(),
                cap: config.max_train_rows,
            });
        }
        let spec = SplitSpec {
            train_fraction: config.max_train_rows as f64 / table.n_rows() as f64,
            seed: config.seed,
            stratified: true,
        };
        let (keep, _) = flowdata::split_indices(table.labels(), &spec)?;
        log::warn!(
            "SVM: stratified subsample of {} / {} training rows",
            keep.len(),
            table.n_rows()
        );
        sub = table.subset(&keep);
        &sub
    } else {
        table
    };
    let m = table.n_features();
    let gamma = config.gamma.unwrap_or(1.0 / m.max(1) as f64);
    let rows: Vec<&[f64]> = table.rows().collect();
    let y: Vec<f64> = table.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let sol = solve_smo(&rows, &y, config.c, gamma, config.tol, config.max_iter, config.cache_mb);
    if !sol.converged {
        log::warn!(
            "SVM: SMO stopped after {} iterations with KKT gap {:.3e}",
            sol.iterations,
            sol.kkt_gap
        );
    }
    let mut model = Svm {
        support_vectors: Vec::new(),
        dual_coef: Vec::new(),
        bias: sol.bias,
        gamma,
        platt_a: 0.0,
        platt_b: 0.0,
        n_features: m,
        converged: sol.converged,
    };
    for (i, &a) in sol.alphas.iter().enumerate() {
        if a > 0.0 {
            model.support_vectors.push(rows[i].to_vec());
            model.dual_coef.push(a * y[i]);
        }
    }
    let decisions: Vec<f64> = rows.iter().map(|r| model.decision(r)).collect();
    let (a, b) = fit_platt(&decisions, table.labels());
    model.platt_a = a;
    model.platt_b = b;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_midpoint_is_on_boundary() {
        let t = FlowTable::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]], &[0, 1]).unwrap();
        let svm = train_svm_rbf(&t, &SvmConfig::default()).unwrap();
        assert!(svm.decision(&[0.5, 0.5]).abs() < 1e-6);
        assert!(svm.decision(&[1.0, 1.0]) > 0.0);
    }

    #[test]
    fn xor_is_separated() {
        let t = FlowTable::from_rows(
            &[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            &[0, 0, 1, 1],
        )
        .unwrap();
        let cfg = SvmConfig {
            gamma: Some(1.0),
            ..SvmConfig::default()
        };
        let svm = train_svm_rbf(&t, &cfg).unwrap();
        assert_eq!(svm.predict(&t), vec![0, 0, 1, 1]);
        assert!(svm.converged);
    }

    #[test]
    fn equality_constraint_holds() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()]).collect();
        let labels: Vec<u8> = rows.iter().map(|r| (r[0] * r[1] > 0.0) as u8).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let sol = solve_smo(&refs, &y, 1.0, 0.5, 1e-3, 100_000, 16);
        assert!(sol.converged);
        let s: f64 = sol.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(s.abs() < 1e-9);
        assert!(sol.alphas.iter().all(|&a| (0.0..=1.0).contains(&a)));
    }

    #[test]
    fn oversized_training_set_requires_opt_in() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let labels: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let t = FlowTable::from_rows(&rows, &labels).unwrap();
        let cfg = SvmConfig {
            max_train_rows: 10,
            ..SvmConfig::default()
        };
        assert!(matches!(
            train_svm_rbf(&t, &cfg),
            Err(Error::TrainingSetTooLarge { rows: 30, cap: 10 })
        ));
        let ok = train_svm_rbf(
            &t,
            &SvmConfig {
                auto_subsample: true,
                ..cfg
            },
        )
        .unwrap();
        assert!(ok.support_vectors.len() <= 10);
    }
}
