//! Shapley values with an interventional value function.
//!
//! `v(S)` is the mean model probability over background rows after copying the
//! instance's values into the features of `S`. Up to `exact_threshold`
//! features every coalition is enumerated; above it KernelSHAP solves the
//! Shapley-kernel weighted least squares over a coalition budget, with the
//! efficiency constraint imposed exactly.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_instance, compensated_sum, names_for, rank_by_magnitude, Attribution, AttributionKind};
use crate::error::{Error, Result};
use crate::flowdata::{csv_escape, FlowTable};
use crate::learners::Learner;
use crate::linalg;
use crate::rng::{self, Purpose};

/// Hard ceiling on exact enumeration (2^m coalitions).
pub const MAX_EXACT_FEATURES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapConfig {
    /// Rows drawn by [`sample_background`].
    pub background_size: usize,
    pub n_coalition_samples: usize,
    /// Enumerate all coalitions when the feature count is at most this.
    pub exact_threshold: usize,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            background_size: 100,
            n_coalition_samples: 2048,
            exact_threshold: 12,
            seed: 42,
        }
    }
}

/// Up to `n` distinct rows chosen uniformly without replacement, kept in
/// table order.
pub fn sample_background(table: &FlowTable, n: usize, seed: u64) -> Result<FlowTable> {
    if table.is_empty() || n == 0 {
        return Err(Error::EmptyBackground);
    }
    if n >= table.n_rows() {
        return Ok(table.clone());
    }
    let mut rng = rng::stream(seed, Purpose::Background, 0);
    let mut idx: Vec<usize> = (0..table.n_rows()).collect();
    for i in 0..n {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    let mut keep = idx[..n].to_vec();
    keep.sort_unstable();
    Ok(table.subset(&keep))
}

struct ValueFn<'a> {
    model: &'a dyn Learner,
    instance: &'a [f64],
    background: &'a FlowTable,
}

impl ValueFn<'_> {
    fn eval(&self, in_coalition: impl Fn(usize) -> bool) -> f64 {
        let m = self.instance.len();
        let mut z = vec![0.0; m];
        let total = compensated_sum(self.background.rows().map(|b| {
            for j in 0..m {
                z[j] = if in_coalition(j) { self.instance[j] } else { b[j] };
            }
            self.model.predict_proba_row(&z)
        }));
        total / self.background.n_rows() as f64
    }
}

fn validate(model: &dyn Learner, instance: &[f64], background: &FlowTable) -> Result<()> {
    check_instance(instance, model.n_features())?;
    if background.is_empty() {
        return Err(Error::EmptyBackground);
    }
    if background.n_features() != instance.len() {
        return Err(Error::DimensionMismatch {
            expected: instance.len(),
            found: background.n_features(),
        });
    }
    Ok(())
}

fn finish(phi: Vec<f64>, base: f64, prediction: f64, background: &FlowTable) -> Attribution {
    let residual = (base + compensated_sum(phi.iter().copied()) - prediction).abs();
    Attribution {
        kind: AttributionKind::Shap,
        feature_names: names_for(Some(background), phi.len()),
        ranked: rank_by_magnitude(&phi),
        feature_contribs: phi,
        base_value: base,
        prediction,
        fidelity: residual,
    }
}

/// Exact Shapley values by enumerating all `2^m` coalitions.
pub fn shap_exact(model: &dyn Learner, instance: &[f64], background: &FlowTable) -> Result<Attribution> {
    validate(model, instance, background)?;
    let m = instance.len();
    if m > MAX_EXACT_FEATURES {
        return Err(Error::InvalidConfig(format!(
            "exact Shapley enumeration limited to {MAX_EXACT_FEATURES} features, got {m}"
        )));
    }
    let vf = ValueFn {
        model,
        instance,
        background,
    };
    let values: Vec<f64> = (0u32..(1u32 << m))
        .into_par_iter()
        .map(|mask| vf.eval(|j| mask >> j & 1 == 1))
        .collect();
    // |S|! (m - |S| - 1)! / m!
    let weight: Vec<f64> = (0..m.max(1)).map(|s| 1.0 / (m as f64 * binomial(m - 1, s))).collect();
    let phi: Vec<f64> = (0..m)
        .map(|j| {
            let bit = 1u32 << j;
            compensated_sum(
                (0u32..(1u32 << m))
                    .filter(|mask| mask & bit == 0)
                    .map(|mask| weight[mask.count_ones() as usize] * (values[(mask | bit) as usize] - values[mask as usize])),
            )
        })
        .collect();
    let prediction = model.predict_proba_row(instance);
    Ok(finish(phi, values[0], prediction, background))
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Sampled KernelSHAP.
pub fn kernel_shap(model: &dyn Learner, instance: &[f64], background: &FlowTable, config: &ShapConfig) -> Result<Attribution> {
    kernel_shap_indexed(model, instance, background, config, 0)
}

fn kernel_shap_indexed(
    model: &dyn Learner,
    instance: &[f64],
    background: &FlowTable,
    config: &ShapConfig,
    stream: u64,
) -> Result<Attribution> {
    validate(model, instance, background)?;
    let m = instance.len();
    let vf = ValueFn {
        model,
        instance,
        background,
    };
    let base = vf.eval(|_| false);
    let prediction = model.predict_proba_row(instance);
    let delta = prediction - base;
    if m <= 1 {
        return Ok(finish(vec![delta; m], base, prediction, background));
    }

    let (coalitions, weights) = coalition_plan(m, config.n_coalition_samples.max(2 * m), config.seed, stream);
    let values: Vec<f64> = coalitions.par_iter().map(|c| vf.eval(|j| c[j])).collect();

    // Eliminate the last coefficient through sum(phi) = delta.
    let last = m - 1;
    let mut xtx = DMatrix::<f64>::zeros(last, last);
    let mut xty = DVector::<f64>::zeros(last);
    let mut row = vec![0.0; last];
    for ((c, &v), &w) in coalitions.iter().zip(&values).zip(&weights) {
        let zl = c[last] as u8 as f64;
        for j in 0..last {
            row[j] = c[j] as u8 as f64 - zl;
        }
        let y = v - base - zl * delta;
        for a in 0..last {
            if row[a] == 0.0 {
                continue;
            }
            xty[a] += w * row[a] * y;
            for b in a..last {
                xtx[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    for a in 0..last {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }
    let sol = linalg::solve_symmetric(xtx, &xty)?;
    let mut phi: Vec<f64> = sol.iter().copied().collect();
    phi.push(delta - compensated_sum(phi.iter().copied()));
    Ok(finish(phi, base, prediction, background))
}

/// Coalitions and their kernel weights under a budget.
///
/// Coalition sizes are visited from the outside in (1 and m-1 first, where
/// the Shapley kernel is heaviest). A size and its complement are enumerated
/// completely while the budget covers them; the remaining sizes are sampled in
/// proportion to their kernel mass, and sampled weights are rescaled to that
/// mass.
fn coalition_plan(m: usize, budget: usize, seed: u64, stream: u64) -> (Vec<Vec<bool>>, Vec<f64>) {
    let n_sizes = (m - 1).div_ceil(2);
    let n_paired = (m - 1) / 2;
    let mut size_weight: Vec<f64> = (1..=n_sizes)
        .map(|s| {
            let w = (m - 1) as f64 / (s as f64 * (m - s) as f64);
            if s <= n_paired {
                2.0 * w
            } else {
                w
            }
        })
        .collect();
    let total: f64 = size_weight.iter().sum();
    size_weight.iter_mut().for_each(|w| *w /= total);

    let mut coalitions: Vec<Vec<bool>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut remaining = budget as f64;
    let mut remaining_weight = size_weight.clone();
    let mut n_full = 0;
    for s in 1..=n_sizes {
        let paired = s <= n_paired;
        let count = binomial(m, s) * if paired { 2.0 } else { 1.0 };
        if remaining * remaining_weight[s - 1] / count < 1.0 - 1e-8 {
            break;
        }
        n_full += 1;
        remaining -= count;
        if remaining_weight[s - 1] < 1.0 {
            let scale = 1.0 - remaining_weight[s - 1];
            remaining_weight.iter_mut().for_each(|w| *w /= scale);
        }
        let w = size_weight[s - 1] / count;
        for_each_combination(m, s, |idx| {
            let mut c = vec![false; m];
            for &j in idx {
                c[j] = true;
            }
            if paired {
                coalitions.push(c.iter().map(|b| !b).collect());
                weights.push(w);
            }
            coalitions.push(c);
            weights.push(w);
        });
    }

    if n_full < n_sizes {
        let n_fixed = coalitions.len();
        let left: Vec<f64> = size_weight[n_full..].to_vec();
        let weight_left: f64 = left.iter().sum();
        let pick = WeightedIndex::new(&left).expect("positive kernel weights");
        let mut rng = rng::stream(seed, Purpose::Shap, stream);
        let mut seen: HashMap<Vec<bool>, usize> = HashMap::new();
        let mut to_draw = remaining.max(0.0) as usize;
        let mut attempts = 0;
        while to_draw > 0 && attempts < 4 * budget {
            attempts += 1;
            let s = n_full + 1 + pick.sample(&mut rng);
            let mut pool: Vec<usize> = (0..m).collect();
            for i in 0..s {
                let j = rng.random_range(i..m);
                pool.swap(i, j);
            }
            let mut c = vec![false; m];
            for &j in &pool[..s] {
                c[j] = true;
            }
            let mut add = |c: Vec<bool>, to_draw: &mut usize| match seen.get(&c) {
                Some(&k) => weights[k] += 1.0,
                None => {
                    seen.insert(c.clone(), coalitions.len());
                    coalitions.push(c);
                    weights.push(1.0);
                    *to_draw = to_draw.saturating_sub(1);
                }
            };
            if s <= n_paired {
                let comp: Vec<bool> = c.iter().map(|b| !b).collect();
                add(c, &mut to_draw);
                add(comp, &mut to_draw);
            } else {
                add(c, &mut to_draw);
            }
        }
        let sampled: f64 = weights[n_fixed..].iter().sum();
        if sampled > 0.0 {
            weights[n_fixed..].iter_mut().for_each(|w| *w *= weight_left / sampled);
        }
    }
    (coalitions, weights)
}

fn for_each_combination(m: usize, s: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        f(&idx);
        let mut i = s;
        while i > 0 && idx[i - 1] == m - s + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for k in i..s {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

/// Exact enumeration up to `exact_threshold` features, KernelSHAP above.
pub fn shap_values(model: &dyn Learner, instance: &[f64], background: &FlowTable, config: &ShapConfig) -> Result<Attribution> {
    if instance.len() <= config.exact_threshold.min(MAX_EXACT_FEATURES) {
        shap_exact(model, instance, background)
    } else {
        kernel_shap(model, instance, background, config)
    }
}

/// Mean `|phi_j|` over a sample of instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub feature_names: Vec<String>,
    pub mean_abs_shap: Vec<f64>,
    /// Feature indices by descending importance.
    pub ranked: Vec<usize>,
    pub n_instances: usize,
}

impl GlobalImportance {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,mean_abs_shap\n");
        for (r, &j) in self.ranked.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", r + 1, csv_escape(&self.feature_names[j]), self.mean_abs_shap[j]));
        }
        out
    }
}

pub fn shap_global_importance(
    model: &dyn Learner,
    sample: &FlowTable,
    background: &FlowTable,
    config: &ShapConfig,
) -> Result<GlobalImportance> {
    if sample.is_empty() {
        return Err(Error::EmptyTable);
    }
    let m = sample.n_features();
    let attributions: Vec<Attribution> = (0..sample.n_rows())
        .into_par_iter()
        .map(|i| {
            let x = sample.row(i);
            if m <= config.exact_threshold.min(MAX_EXACT_FEATURES) {
                shap_exact(model, x, background)
            } else {
                kernel_shap_indexed(model, x, background, config, i as u64)
            }
        })
        .collect::<Result<_>>()?;
    let n = attributions.len() as f64;
    let mean_abs_shap: Vec<f64> = (0..m)
        .map(|j| compensated_sum(attributions.iter().map(|a| a.feature_contribs[j].abs())) / n)
        .collect();
    let mut ranked: Vec<usize> = (0..m).collect();
    ranked.sort_by(|&a, &b| mean_abs_shap[b].total_cmp(&mean_abs_shap[a]).then(a.cmp(&b)));
    Ok(GlobalImportance {
        feature_names: names_for(Some(sample), m),
        mean_abs_shap,
        ranked,
        n_instances: attributions.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear(Vec<f64>);

    impl Learner for Linear {
        fn n_features(&self) -> usize {
            self.0.len()
        }
        fn predict_proba_row(&self, row: &[f64]) -> f64 {
            self.0.iter().zip(row).map(|(w, x)| w * x).sum()
        }
    }

    struct Product;

    impl Learner for Product {
        fn n_features(&self) -> usize {
            4
        }
        fn predict_proba_row(&self, row: &[f64]) -> f64 {
            // feature 3 is never read; 0 and 1 play symmetric roles
            0.5 * row[0] * row[1] + 0.3 * row[2] * row[0].max(row[1])
        }
    }

    fn background() -> FlowTable {
        FlowTable::from_rows(
            &[
                vec![0.1, 0.2, 0.3, 0.4],
                vec![0.5, 0.1, 0.9, 0.0],
                vec![0.3, 0.8, 0.2, 0.7],
                vec![0.9, 0.4, 0.6, 0.1],
            ],
            &[0, 1, 0, 1],
        )
        .unwrap()
    }

    #[test]
    fn constant_model_gets_zero() {
        let model = Linear(vec![0.0; 4]);
        let a = shap_exact(&model, &[1.0, 2.0, 3.0, 4.0], &background()).unwrap();
        assert!(a.feature_contribs.iter().all(|&v| v == 0.0));
        assert_eq!(a.base_value, 0.0);
    }

    #[test]
    fn linear_model_closed_form() {
        let w = vec![0.5, -1.0, 2.0, 0.25];
        let bg = background();
        let x = [0.7, 0.1, 0.4, 0.9];
        let a = shap_exact(&Linear(w.clone()), &x, &bg).unwrap();
        for j in 0..4 {
            let mean: f64 = bg.column(j).sum::<f64>() / 4.0;
            assert!((a.feature_contribs[j] - w[j] * (x[j] - mean)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_properties_on_nonlinear_model() {
        let bg = background();
        let x = [0.6, 0.6, 0.8, 0.3];
        let a = shap_exact(&Product, &x, &bg).unwrap();
        assert!(a.fidelity <= 1e-12);
        assert_eq!(a.feature_contribs[3], 0.0);
        let sym = shap_exact(&Product, &[0.6, 0.6, 0.8, 0.3], &FlowTable::from_rows(&[vec![0.2, 0.2, 0.1, 0.5]], &[0]).unwrap()).unwrap();
        assert!((sym.feature_contribs[0] - sym.feature_contribs[1]).abs() < 1e-12);
    }

    #[test]
    fn kernel_matches_exact_with_full_budget() {
        let bg = background();
        let x = [0.6, 0.2, 0.8, 0.3];
        let exact = shap_exact(&Product, &x, &bg).unwrap();
        let kernel = kernel_shap(&Product, &x, &bg, &ShapConfig::default()).unwrap();
        for j in 0..4 {
            assert!((exact.feature_contribs[j] - kernel.feature_contribs[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn sampled_kernel_is_close_on_wider_model() {
        let m = 16;
        let w: Vec<f64> = (0..m).map(|j| ((j * 7) % 5) as f64 / 10.0 - 0.2).collect();
        let rows: Vec<Vec<f64>> = (0..6).map(|i| (0..m).map(|j| ((i * 3 + j) % 7) as f64 / 7.0).collect()).collect();
        let bg = FlowTable::from_rows(&rows, &[0, 1, 0, 1, 0, 1]).unwrap();
        let x: Vec<f64> = (0..m).map(|j| (j % 3) as f64 / 2.0).collect();
        let cfg = ShapConfig {
            n_coalition_samples: 512,
            ..ShapConfig::default()
        };
        let a = kernel_shap(&Linear(w.clone()), &x, &bg, &cfg).unwrap();
        assert!(a.fidelity < 1e-9);
        for j in 0..m {
            let mean: f64 = bg.column(j).sum::<f64>() / 6.0;
            assert!((a.feature_contribs[j] - w[j] * (x[j] - mean)).abs() < 1e-6, "feature {j}");
        }
    }

    #[test]
    fn coalition_plan_enumerates_small_problems() {
        let (c, w) = coalition_plan(5, 2048, 1, 0);
        assert_eq!(c.len(), 30);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn background_sampling() {
        let bg = background();
        assert_eq!(sample_background(&bg, 10, 1).unwrap(), bg);
        let two = sample_background(&bg, 2, 1).unwrap();
        assert_eq!(two.n_rows(), 2);
        assert!(matches!(sample_background(&bg, 0, 1), Err(Error::EmptyBackground)));
    }

    #[test]
    fn ignored_feature_has_zero_global_importance() {
        let bg = background();
        let g = shap_global_importance(&Product, &bg, &bg, &ShapConfig::default()).unwrap();
        assert_eq!(g.mean_abs_shap[3], 0.0);
        assert_eq!(*g.ranked.last().unwrap(), 3);
    }
}
