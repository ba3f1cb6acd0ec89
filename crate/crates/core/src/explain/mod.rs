//! Model-agnostic explanations on the probability output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::{csv_escape, FlowTable};

pub mod lime;
pub mod shap;

pub use lime::{lime_explain, LimeConfig};
pub use shap::{
    kernel_shap, sample_background, shap_exact, shap_global_importance, shap_values, GlobalImportance, ShapConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionKind {
    Shap,
    Lime,
}

/// Per-feature contributions for one instance.
///
/// For SHAP `base_value` is the background expectation and `fidelity` is the
/// local-accuracy residual `|base + sum(contribs) - prediction|`. For LIME
/// `base_value` is the surrogate intercept, `fidelity` its weighted R^2, and
/// features outside the retained top-k carry 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub kind: AttributionKind,
    pub feature_names: Vec<String>,
    pub feature_contribs: Vec<f64>,
    pub base_value: f64,
    pub prediction: f64,
    pub fidelity: f64,
    /// Feature indices ordered by descending `|contribution|`; for LIME only
    /// the retained ones.
    pub ranked: Vec<usize>,
}

impl Attribution {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// `feature,contribution` rows in ranked order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,contribution\n");
        for &j in &self.ranked {
            out.push_str(&format!("{},{}\n", csv_escape(&self.feature_names[j]), self.feature_contribs[j]));
        }
        out
    }
}

/// Indices sorted by descending `|v|`, ties by ascending index.
pub fn rank_by_magnitude(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx
}

/// Neumaier-compensated sum, evaluated in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub(crate) fn check_instance(instance: &[f64], n_features: usize) -> Result<()> {
    if instance.len() != n_features {
        return Err(Error::DimensionMismatch {
            expected: n_features,
            found: instance.len(),
        });
    }
    Ok(())
}

pub(crate) fn names_for(table: Option<&FlowTable>, m: usize) -> Vec<String> {
    match table {
        Some(t) if t.n_features() == m => t.feature_names().to_vec(),
        _ => (0..m).map(|j| format!("f{j}")).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn ranking_is_stable() {
        assert_eq!(rank_by_magnitude(&[0.1, -0.3, 0.3, 0.0]), vec![1, 2, 0, 3]);
    }
}
