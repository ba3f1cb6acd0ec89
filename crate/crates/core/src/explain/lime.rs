//! Local linear surrogates fitted on Gaussian perturbations.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_instance, compensated_sum, names_for, rank_by_magnitude, Attribution, AttributionKind};
use crate::error::{Error, Result};
use crate::flowdata::FlowTable;
use crate::learners::Learner;
use crate::linalg;
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_perturbations: usize,
    /// `None` means `0.75 * sqrt(m)`; `f64::INFINITY` weighs every sample equally.
    pub kernel_width: Option<f64>,
    pub ridge_lambda: f64,
    pub top_k_features: usize,
    /// Per-feature standard deviation of the perturbations.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_perturbations: 5000,
            kernel_width: None,
            ridge_lambda: 1.0,
            top_k_features: 10,
            sigma: 0.3,
            seed: 42,
        }
    }
}

/// Explains `model` around `instance`. `reference` only supplies feature
/// names and may be `None`.
pub fn lime_explain(
    model: &dyn Learner,
    instance: &[f64],
    reference: Option<&FlowTable>,
    config: &LimeConfig,
) -> Result<Attribution> {
    let m = model.n_features();
    check_instance(instance, m)?;
    if config.top_k_features == 0 || config.n_perturbations < config.top_k_features + 1 {
        return Err(Error::InvalidConfig(format!(
            "need top_k >= 1 and at least top_k + 1 perturbations (got {} and {})",
            config.top_k_features, config.n_perturbations
        )));
    }
    if !(config.sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", config.sigma)));
    }
    let width = config.kernel_width.unwrap_or(0.75 * (m as f64).sqrt());
    if !(width > 0.0) {
        return Err(Error::InvalidConfig(format!("kernel width must be positive, got {width}")));
    }
    let n = config.n_perturbations;
    let noise = Normal::new(0.0, config.sigma).expect("finite sigma");
    let mut rng = rng::stream(config.seed, Purpose::Lime, 0);
    let mut x = Vec::with_capacity(n * m);
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        let mut d2 = 0.0;
        for &v in instance {
            let e = noise.sample(&mut rng);
            x.push(v + e);
            d2 += e * e;
        }
        weights.push(if width.is_infinite() { 1.0 } else { (-d2 / (width * width)).exp() });
    }
    if !(compensated_sum(weights.iter().copied()) > 0.0) {
        return Err(Error::DegeneratePerturbations);
    }
    let y: Vec<f64> = x.par_chunks(m.max(1)).take(n).map(|r| model.predict_proba_row(r)).collect();

    let (full, _) = linalg::weighted_ridge(&x, m, &y, &weights, config.ridge_lambda)?;
    let keep_n = config.top_k_features.min(m);
    let mut keep: Vec<usize> = rank_by_magnitude(&full)[..keep_n].to_vec();
    keep.sort_unstable();
    let xs: Vec<f64> = (0..n).flat_map(|i| keep.iter().map(move |&j| (i, j))).map(|(i, j)| x[i * m + j]).collect();
    let (beta, intercept) = linalg::weighted_ridge(&xs, keep_n, &y, &weights, config.ridge_lambda)?;

    let w_sum = compensated_sum(weights.iter().copied());
    let y_mean = compensated_sum(weights.iter().zip(&y).map(|(w, v)| w * v)) / w_sum;
    let mut ss_res = Vec::with_capacity(n);
    let mut ss_tot = Vec::with_capacity(n);
    for i in 0..n {
        let fit = intercept + beta.iter().enumerate().map(|(k, b)| b * xs[i * keep_n + k]).sum::<f64>();
        ss_res.push(weights[i] * (y[i] - fit).powi(2));
        ss_tot.push(weights[i] * (y[i] - y_mean).powi(2));
    }
    let (res, tot) = (compensated_sum(ss_res), compensated_sum(ss_tot));
    let fidelity = if tot > 0.0 {
        (1.0 - res / tot).clamp(0.0, 1.0)
    } else if res <= 1e-24 {
        1.0
    } else {
        0.0
    };

    let mut contribs = vec![0.0; m];
    for (k, &j) in keep.iter().enumerate() {
        contribs[j] = beta[k];
    }
    let mut ranked = keep.clone();
    ranked.sort_by(|&a, &b| contribs[b].abs().total_cmp(&contribs[a].abs()).then(a.cmp(&b)));
    Ok(Attribution {
        kind: AttributionKind::Lime,
        feature_names: names_for(reference, m),
        feature_contribs: contribs,
        base_value: intercept,
        prediction: model.predict_proba_row(instance),
        fidelity,
        ranked,
    })
}
