//! Feature ranking and selection: binned information gain, Lasso (L1) and
//! Fisher score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::{self, FlowTable};

/// Default information-gain cut, in bits.
pub const IG_THRESHOLD: f64 = 0.1;
/// Default number of Fisher-score features kept.
pub const FISHER_TOP_K: usize = 47;
/// Within-class sum of squares is floored at this fraction of the total sum
/// of squares, so features constant within each class score a large but
/// finite, scale-free value.
pub const FISHER_VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    InfoGain,
    LassoL1,
    FisherScore,
}

/// The cut applied to the scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutRule {
    /// Keep scores strictly above `value`.
    Threshold { value: f64 },
    /// Keep the `k` highest scores; ties broken by lower index.
    TopK { k: usize },
    /// Keep nonzero Lasso coefficients fitted at `lambda`.
    NonZero { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub method: SelectionMethod,
    pub scores: Vec<f64>,
    /// Retained feature indices, ascending.
    pub selected: Vec<usize>,
    pub rule: CutRule,
    /// Names matching `scores`, when known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feature_names: Vec<String>,
}

impl FeatureRanking {
    /// Feature indices ordered by descending score (stable by index).
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// `feature,score,selected` rows in descending score order.
    pub fn scores_csv(&self) -> String {
        let mut out = String::from("rank,index,feature,score,selected\n");
        for (rank, j) in self.ranked().into_iter().enumerate() {
            let name = self
                .feature_names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("f{j}"));
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                rank + 1,
                j,
                flowdata::csv_escape(&name),
                self.scores[j],
                self.selected.binary_search(&j).is_ok()
            ));
        }
        out
    }
}

fn entropy2(counts: [f64; 2]) -> f64 {
    let n = counts[0] + counts[1];
    if n == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum()
}

/// Equal-width bin on [0, 1]; values outside are clamped.
pub fn bin_of(x: f64, n_bins: usize) -> usize {
    let b = (x.clamp(0.0, 1.0) * n_bins as f64).floor() as usize;
    b.min(n_bins - 1)
}

/// Information gain (bits) of each feature after equal-width binning.
pub fn information_gain(table: &FlowTable, n_bins: usize) -> Result<FeatureRanking> {
    information_gain_with_threshold(table, n_bins, IG_THRESHOLD)
}

pub fn information_gain_with_threshold(
    table: &FlowTable,
    n_bins: usize,
    threshold: f64,
) -> Result<FeatureRanking> {
    if n_bins < 2 {
        return Err(Error::InvalidConfig(format!("n_bins must be >= 2, got {n_bins}")));
    }
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let counts = table.class_counts();
    let h_y = entropy2([counts[0] as f64, counts[1] as f64]);
    let n = table.n_rows() as f64;
    let m = table.n_features();
    if counts[0] == 0 || counts[1] == 0 {
        log::warn!("information gain: labels hold a single class; every score is 0");
    }
    let scores: Vec<f64> = (0..m)
        .map(|j| {
            let mut contingency = vec![[0.0f64; 2]; n_bins];
            for (x, &y) in table.column(j).zip(table.labels()) {
                contingency[bin_of(x, n_bins)][y as usize] += 1.0;
            }
            let conditional: f64 = contingency
                .iter()
                .map(|c| (c[0] + c[1]) / n * entropy2(*c))
                .sum();
            (h_y - conditional).clamp(0.0, h_y)
        })
        .collect();
    let selected = (0..m).filter(|&j| scores[j] > threshold).collect();
    Ok(FeatureRanking {
        method: SelectionMethod::InfoGain,
        scores,
        selected,
        rule: CutRule::Threshold { value: threshold },
        feature_names: table.feature_names().to_vec(),
    })
}

/// Fisher score of each feature; keeps the top `k`.
pub fn fisher_score(table: &FlowTable, k: usize) -> Result<FeatureRanking> {
    let scores = fisher_scores(table)?;
    let mut ranking = FeatureRanking {
        method: SelectionMethod::FisherScore,
        scores,
        selected: Vec::new(),
        rule: CutRule::TopK { k },
        feature_names: table.feature_names().to_vec(),
    };
    let mut top: Vec<usize> = ranking.ranked().into_iter().take(k).collect();
    top.sort_unstable();
    ranking.selected = top;
    Ok(ranking)
}

pub fn fisher_scores(table: &FlowTable) -> Result<Vec<f64>> {
    let counts = table.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    let n = table.n_rows() as f64;
    let nc = [counts[0] as f64, counts[1] as f64];
    Ok((0..table.n_features())
        .map(|j| {
            // shifting by the first value makes constant columns exactly zero
            let x0 = table.column(j).next().unwrap_or(0.0);
            let mut sum = [0.0f64; 2];
            for (x, &y) in table.column(j).zip(table.labels()) {
                sum[y as usize] += x - x0;
            }
            let mean_c = [sum[0] / nc[0], sum[1] / nc[1]];
            let mean = (sum[0] + sum[1]) / n;
            let mut ss = [0.0f64; 2];
            for (x, &y) in table.column(j).zip(table.labels()) {
                let d = x - x0 - mean_c[y as usize];
                ss[y as usize] += d * d;
            }
            // n_c * sigma_c^2 is the within-class sum of squares.
            let numerator: f64 = (0..2).map(|c| nc[c] * (mean_c[c] - mean).powi(2)).sum();
            if numerator == 0.0 {
                return 0.0;
            }
            let denominator = ss[0] + ss[1];
            numerator / denominator.max(FISHER_VARIANCE_FLOOR * (numerator + denominator))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    /// Penalty; `None` picks it by k-fold CV over a log grid.
    pub lambda: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub cv_folds: usize,
    pub n_lambdas: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            max_iters: 1000,
            tol: 1e-6,
            seed: 42,
            cv_folds: 5,
            n_lambdas: 30,
        }
    }
}

/// Result of a Lasso fit on `(1/2n)||y - b - X beta||^2 + lambda ||beta||_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Largest KKT violation at the returned iterate.
    pub kkt_residual: f64,
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Centered design, column-major, for coordinate descent.
struct Centered {
    cols: Vec<Vec<f64>>,
    col_means: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
    sq_norms: Vec<f64>,
}

impl Centered {
    fn new(table: &FlowTable, rows: Option<&[usize]>) -> Self {
        let idx: Vec<usize> = match rows {
            Some(r) => r.to_vec(),
            None => (0..table.n_rows()).collect(),
        };
        let n = idx.len() as f64;
        let y_raw: Vec<f64> = idx.iter().map(|&i| table.labels()[i] as f64).collect();
        let y_mean = y_raw.iter().sum::<f64>() / n;
        let y = y_raw.iter().map(|v| v - y_mean).collect();
        let mut cols = Vec::with_capacity(table.n_features());
        let mut col_means = Vec::with_capacity(table.n_features());
        let mut sq_norms = Vec::with_capacity(table.n_features());
        for j in 0..table.n_features() {
            let raw: Vec<f64> = idx.iter().map(|&i| table.row(i)[j]).collect();
            let mean = raw.iter().sum::<f64>() / n;
            let col: Vec<f64> = raw.iter().map(|v| v - mean).collect();
            sq_norms.push(col.iter().map(|v| v * v).sum::<f64>() / n);
            col_means.push(mean);
            cols.push(col);
        }
        Self {
            cols,
            col_means,
            y,
            y_mean,
            sq_norms,
        }
    }

    fn n(&self) -> f64 {
        self.y.len() as f64
    }

    fn lambda_max(&self) -> f64 {
        self.cols
            .iter()
            .map(|c| dot(c, &self.y).abs() / self.n())
            .fold(0.0, f64::max)
    }

    fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (col, &b) in self.cols.iter().zip(beta) {
            if b != 0.0 {
                for (ri, xi) in r.iter_mut().zip(col) {
                    *ri -= b * xi;
                }
            }
        }
        r
    }

    fn kkt_residual(&self, beta: &[f64], r: &[f64], lambda: f64) -> f64 {
        self.cols
            .iter()
            .zip(beta)
            .map(|(col, &b)| {
                let g = -dot(col, r) / self.n();
                if b == 0.0 {
                    (g.abs() - lambda).max(0.0)
                } else {
                    (g + lambda * b.signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    fn solve(&self, lambda: f64, beta0: Vec<f64>, max_iters: usize, tol: f64) -> LassoFit {
        let n = self.n();
        let mut beta = beta0;
        let mut r = self.residual(&beta);
        let mut kkt = self.kkt_residual(&beta, &r, lambda);
        let mut sweeps = 0;
        while kkt > tol && sweeps < max_iters {
            for j in 0..beta.len() {
                let z = self.sq_norms[j];
                if z <= 0.0 {
                    beta[j] = 0.0;
                    continue;
                }
                let col = &self.cols[j];
                let rho = dot(col, &r) / n + z * beta[j];
                let new = soft_threshold(rho, lambda) / z;
                let delta = new - beta[j];
                if delta != 0.0 {
                    for (ri, xi) in r.iter_mut().zip(col) {
                        *ri -= delta * xi;
                    }
                    beta[j] = new;
                }
            }
            sweeps += 1;
            r = self.residual(&beta);
            kkt = self.kkt_residual(&beta, &r, lambda);
        }
        let intercept = self.y_mean - dot(&self.col_means, &beta);
        LassoFit {
            coefficients: beta,
            intercept,
            lambda,
            sweeps,
            converged: kkt <= tol,
            kkt_residual: kkt,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest penalty at which every coefficient is zero.
pub fn lasso_lambda_max(table: &FlowTable) -> f64 {
    Centered::new(table, None).lambda_max()
}

/// Cyclic coordinate descent with soft-thresholding, run until the KKT
/// violation drops to `tol` or `max_iters` sweeps pass.
pub fn lasso_fit(table: &FlowTable, lambda: f64, max_iters: usize, tol: f64) -> Result<LassoFit> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
    }
    let data = Centered::new(table, None);
    Ok(data.solve(lambda, vec![0.0; table.n_features()], max_iters, tol))
}

/// Objective value `(1/2n)||y - b - X beta||^2 + lambda ||beta||_1`.
pub fn lasso_objective(table: &FlowTable, coefficients: &[f64], intercept: f64, lambda: f64) -> f64 {
    let n = table.n_rows() as f64;
    let loss: f64 = table
        .rows()
        .zip(table.labels())
        .map(|(row, &y)| {
            let pred = intercept + dot(row, coefficients);
            (y as f64 - pred).powi(2)
        })
        .sum::<f64>()
        / (2.0 * n);
    loss + lambda * coefficients.iter().map(|b| b.abs()).sum::<f64>()
}

/// Penalty chosen by stratified k-fold CV (minimum mean held-out MSE) over a
/// log-spaced grid from `lambda_max` down to `1e-4 * lambda_max`.
pub fn lasso_cv_lambda(table: &FlowTable, config: &LassoConfig) -> Result<f64> {
    let lambda_max = lasso_lambda_max(table);
    if lambda_max == 0.0 {
        return Ok(0.0);
    }
    let n_l = config.n_lambdas.max(2);
    let grid: Vec<f64> = (0..n_l)
        .map(|i| lambda_max * 10f64.powf(-4.0 * i as f64 / (n_l - 1) as f64))
        .collect();
    let folds = flowdata::stratified_folds(table.labels(), config.cv_folds, config.seed)?;
    let mut mse = vec![0.0f64; grid.len()];
    for f in 0..config.cv_folds {
        let train: Vec<usize> = (0..table.n_rows()).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..table.n_rows()).filter(|&i| folds[i] == f).collect();
        let data = Centered::new(table, Some(&train));
        let mut beta = vec![0.0; table.n_features()];
        for (g, &lambda) in grid.iter().enumerate() {
            let fit = data.solve(lambda, beta, config.max_iters, config.tol);
            let err: f64 = test
                .iter()
                .map(|&i| {
                    let pred = fit.intercept + dot(table.row(i), &fit.coefficients);
                    (table.labels()[i] as f64 - pred).powi(2)
                })
                .sum::<f64>()
                / test.len() as f64;
            mse[g] += err / config.cv_folds as f64;
            beta = fit.coefficients;
        }
    }
    let best = (0..grid.len())
        .min_by(|&a, &b| mse[a].total_cmp(&mse[b]).then(a.cmp(&b)))
        .unwrap();
    Ok(grid[best])
}

/// Lasso selection: features with nonzero coefficients are kept and
/// `|coefficient|` is the score. Returns the fit alongside the ranking so the
/// caller can see convergence.
pub fn lasso_select_detailed(
    table: &FlowTable,
    config: &LassoConfig,
) -> Result<(FeatureRanking, LassoFit)> {
    let lambda = match config.lambda {
        Some(l) => l,
        None => lasso_cv_lambda(table, config)?,
    };
    let fit = lasso_fit(table, lambda, config.max_iters, config.tol)?;
    if !fit.converged {
        log::warn!(
            "lasso did not converge in {} sweeps (KKT residual {:.3e})",
            fit.sweeps,
            fit.kkt_residual
        );
    }
    let ranking = FeatureRanking {
        method: SelectionMethod::LassoL1,
        scores: fit.coefficients.iter().map(|b| b.abs()).collect(),
        selected: (0..fit.coefficients.len())
            .filter(|&j| fit.coefficients[j] != 0.0)
            .collect(),
        rule: CutRule::NonZero { lambda },
        feature_names: table.feature_names().to_vec(),
    };
    Ok((ranking, fit))
}

pub fn lasso_select(table: &FlowTable, config: &LassoConfig) -> Result<FeatureRanking> {
    Ok(lasso_select_detailed(table, config)?.0)
}

pub fn apply_selection(table: &FlowTable, ranking: &FeatureRanking) -> Result<FlowTable> {
    table.select_columns(&ranking.selected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[Vec<f64>], labels: &[u8]) -> FlowTable {
        FlowTable::from_rows(rows, labels).unwrap()
    }

    #[test]
    fn perfect_binary_predictor_has_one_bit() {
        let t = table(
            &[vec![0.0, 0.3], vec![1.0, 0.3], vec![0.0, 0.3], vec![1.0, 0.3]],
            &[0, 1, 0, 1],
        );
        let r = information_gain(&t, 10).unwrap();
        assert!((r.scores[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.scores[1], 0.0);
        assert_eq!(r.selected, vec![0]);
    }

    #[test]
    fn ig_hand_computed_toy() {
        // feature 0 bins: {0.05,0.05,0.05,0.95,0.95,0.95,0.95,0.55}
        let xs = [0.05, 0.05, 0.05, 0.95, 0.95, 0.95, 0.95, 0.55];
        let ys = [0u8, 0, 1, 1, 1, 1, 0, 0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, 1.0 - x]).collect();
        let r = information_gain(&table(&rows, &ys), 10).unwrap();
        // H(y) = 1; bin0: (2,1) bin9: (1,3) bin5: (1,0)
        let h = |a: f64, b: f64| {
            let n = a + b;
            let mut s = 0.0;
            for c in [a, b] {
                if c > 0.0 {
                    s -= c / n * (c / n).log2();
                }
            }
            s
        };
        let expected = 1.0 - (3.0 / 8.0 * h(2.0, 1.0) + 4.0 / 8.0 * h(1.0, 3.0));
        assert!((r.scores[0] - expected).abs() < 1e-12);
        // the mirrored feature lands in mirrored bins: 0.95->bin0, 0.45->bin4
        assert!((r.scores[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn ig_single_class_is_all_zero() {
        let t = table(&[vec![0.1], vec![0.9]], &[1, 1]);
        let r = information_gain(&t, 10).unwrap();
        assert_eq!(r.scores, vec![0.0]);
        assert!(r.selected.is_empty());
    }

    #[test]
    fn fisher_two_unit_variance_classes() {
        // class 0 at {-1, 1} (mean 0, var 1), class 1 at {1, 3} (mean 2, var 1)
        let t = table(&[vec![-1.0], vec![1.0], vec![1.0], vec![3.0]], &[0, 0, 1, 1]);
        let s = fisher_scores(&t).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fisher_equal_means_is_zero_and_zero_variance_ranks_first() {
        let t = table(
            &[vec![0.0, 0.0, 0.2], vec![2.0, 0.0, 0.4], vec![1.0, 1.0, 0.1], vec![1.0, 1.0, 0.9]],
            &[0, 0, 1, 1],
        );
        let r = fisher_score(&t, 2).unwrap();
        assert_eq!(r.scores[0], 0.0);
        assert!((r.scores[1] - 1.0 / FISHER_VARIANCE_FLOOR).abs() < 1.0);
        assert_eq!(r.ranked()[0], 1);
        assert_eq!(r.selected, vec![1, 2]);
        assert!(matches!(
            fisher_score(&table(&[vec![1.0]], &[0]), 1),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn top_k_ties_prefer_lower_index() {
        let t = table(
            &[vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0], vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]],
            &[0, 1, 0, 1],
        );
        let r = fisher_score(&t, 2).unwrap();
        assert_eq!(r.selected, vec![0, 1]);
    }

    #[test]
    fn lasso_full_shrinkage() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.37).fract(), (i % 3) as f64 / 2.0]).collect();
        let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let t = table(&rows, &labels);
        let lmax = lasso_lambda_max(&t);
        let cfg = LassoConfig {
            lambda: Some(lmax),
            ..LassoConfig::default()
        };
        let r = lasso_select(&t, &cfg).unwrap();
        assert!(r.selected.is_empty());
        assert!(r.scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn lasso_without_penalty_is_least_squares() {
        let xs = [-1.5, -0.5, 0.5, 1.5, -1.0, 1.0];
        let ys = [0u8, 0, 1, 1, 0, 1];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let fit = lasso_fit(&table(&rows, &ys), 0.0, 1000, 1e-10).unwrap();
        let (mx, my) = (0.0, 0.5);
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y as f64 - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        assert!((fit.coefficients[0] - sxy / sxx).abs() < 1e-6);
        assert!(fit.converged);
    }

    #[test]
    fn ranking_json_shape() {
        let t = table(&[vec![0.0], vec![1.0], vec![0.1], vec![0.9]], &[0, 1, 0, 1]);
        let r = fisher_score(&t, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["method"], "fisher_score");
        assert_eq!(v["selected"], serde_json::json!([0]));
        assert_eq!(v["rule"]["kind"], "top_k");
        assert_eq!(FeatureRanking::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn apply_selection_keeps_names_and_rows() {
        let t = table(&[vec![1.0, 2.0], vec![3.0, 4.0]], &[0, 1]);
        let r = FeatureRanking {
            method: SelectionMethod::FisherScore,
            scores: vec![1.0, 0.0],
            selected: vec![0],
            rule: CutRule::TopK { k: 1 },
            feature_names: vec![],
        };
        let s = apply_selection(&t, &r).unwrap();
        assert_eq!(s.feature_names(), ["f0"]);
        assert_eq!(s.features(), [1.0, 3.0]);
        let all = FeatureRanking {
            selected: vec![0, 1],
            ..r.clone()
        };
        assert_eq!(apply_selection(&t, &all).unwrap(), t);
        let bad = FeatureRanking {
            selected: vec![2],
            ..r
        };
        assert!(matches!(
            apply_selection(&t, &bad),
            Err(Error::IndexOutOfRange { index: 2, .. })
        ));
    }
}
