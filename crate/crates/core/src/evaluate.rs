//! Classification metrics, ROC/AUC and stratified k-fold cross-validation.
//!
//! Class 1 (keylogger) is the positive class throughout. Ratios with a zero
//! denominator are `None` and serialize as `null`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::{self, csv_escape, FlowTable};
use crate::learners::{Learner, ModelConfig};
use crate::resample::{self, SmoteConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `actual x predicted` table with benign first.
    pub fn to_csv(&self) -> String {
        format!(
            "actual,predicted_benign,predicted_keylogger\nbenign,{},{}\nkeylogger,{},{}\n",
            self.tn, self.fp, self.fn_, self.tp
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Metrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let precision = ratio(cm.tp, cm.tp + cm.fp);
        let recall = ratio(cm.tp, cm.tp + cm.fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        Metrics {
            accuracy: (cm.tp + cm.tn) as f64 / cm.total().max(1) as f64,
            precision,
            recall,
            specificity: ratio(cm.tn, cm.tn + cm.fp),
            f1,
        }
    }
}

pub fn confusion_matrix(labels: &[u8], predictions: &[u8]) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            _ => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

pub fn compute_metrics(labels: &[u8], predictions: &[u8]) -> Result<(ConfusionMatrix, Metrics)> {
    let cm = confusion_matrix(labels, predictions)?;
    Ok((cm, Metrics::from_confusion(&cm)))
}

/// ROC staircase over descending unique score thresholds, from `(0, 0)` to
/// `(1, 1)`, and its trapezoidal area.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<(Vec<[f64; 2]>, f64)> {
    if labels.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: scores.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut counts = vec![(0u64, 0u64)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&s).is_eq() {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        counts.push((fp, tp));
    }
    // twice the area in units of one (negative, positive) pair
    let twice: u128 = counts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) as u128 * (w[1].1 + w[0].1) as u128)
        .sum();
    let auc = twice as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    let points = counts
        .iter()
        .map(|&(f, t)| [f as f64 / n_neg as f64, t as f64 / n_pos as f64])
        .collect();
    Ok((points, auc))
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
pub fn mann_whitney_auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let pos: Vec<f64> = labels.iter().zip(scores).filter(|(y, _)| **y == 1).map(|(_, s)| *s).collect();
    let neg: Vec<f64> = labels.iter().zip(scores).filter(|(y, _)| **y == 0).map(|(_, s)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let mut twice = 0u128;
    for p in &pos {
        for n in &neg {
            twice += match p.total_cmp(n) {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    Ok(twice as f64 / (2.0 * pos.len() as f64 * neg.len() as f64))
}

pub fn roc_csv(points: &[[f64; 2]]) -> String {
    let mut out = String::from("fpr,tpr\n");
    for [f, t] in points {
        let _ = writeln!(out, "{f},{t}");
    }
    out
}

/// Test-set evaluation of one model, optionally with cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub scenario: String,
    /// `holdout` for the fixed train/test split.
    pub protocol: String,
    pub n_evaluated: usize,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    /// `None` when the evaluated rows hold a single class.
    pub auc: Option<f64>,
    pub roc_points: Vec<[f64; 2]>,
    pub cv: Option<CvReport>,
}

impl EvalReport {
    /// Hard labels from `predict`, scores from `predict_proba`.
    pub fn evaluate(model: &dyn Learner, table: &FlowTable, model_name: &str, scenario: &str) -> Result<Self> {
        let predictions = model.predict(table);
        let scores = model.predict_proba(table);
        Self::from_outputs(table.labels(), &predictions, &scores, model_name, scenario)
    }

    pub fn from_outputs(
        labels: &[u8],
        predictions: &[u8],
        scores: &[f64],
        model_name: &str,
        scenario: &str,
    ) -> Result<Self> {
        let (confusion, m) = compute_metrics(labels, predictions)?;
        let (roc_points, auc) = match roc_auc(labels, scores) {
            Ok((p, a)) => (p, Some(a)),
            Err(Error::SingleClass) => (Vec::new(), None),
            Err(e) => return Err(e),
        };
        Ok(EvalReport {
            model: model_name.to_owned(),
            scenario: scenario.to_owned(),
            protocol: "holdout".into(),
            n_evaluated: labels.len(),
            confusion,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            specificity: m.specificity,
            f1: m.f1,
            auc,
            roc_points,
            cv: None,
        })
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            accuracy: self.accuracy,
            precision: self.precision,
            recall: self.recall,
            specificity: self.specificity,
            f1: self.f1,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn roc_csv(&self) -> String {
        roc_csv(&self.roc_points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub auc: Option<f64>,
}

/// Mean and population standard deviation over the folds where a metric is
/// defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_defined: usize,
}

impl MetricSummary {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        if v.is_empty() {
            return MetricSummary {
                mean: None,
                std: None,
                n_defined: 0,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        MetricSummary {
            mean: Some(mean),
            std: Some(var.sqrt()),
            n_defined: v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub smote: bool,
    pub fold_of: Vec<usize>,
    pub folds: Vec<FoldResult>,
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub specificity: MetricSummary,
    pub f1: MetricSummary,
    pub auc: MetricSummary,
}

/// Stratified k-fold cross-validation. When `smote` is given it resamples
/// each training fold only; held-out rows are never synthesized from.
pub fn cross_validate(
    table: &FlowTable,
    config: &ModelConfig,
    k: usize,
    seed: u64,
    smote: Option<&SmoteConfig>,
) -> Result<CvReport> {
    let fold_of = flowdata::stratified_folds(table.labels(), k, seed)?;
    let folds: Vec<FoldResult> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train_rows, test_rows): (Vec<usize>, Vec<usize>) =
                (0..table.n_rows()).partition(|&i| fold_of[i] != f);
            let mut train = table.subset(&train_rows);
            if let Some(cfg) = smote {
                train = resample::smote(&train, cfg)?;
            }
            let test = table.subset(&test_rows);
            let model = config.fit(&train)?;
            let predictions = model.predict(&test);
            let scores = model.predict_proba(&test);
            let (confusion, metrics) = compute_metrics(test.labels(), &predictions)?;
            let auc = roc_auc(test.labels(), &scores).ok().map(|(_, a)| a);
            Ok(FoldResult {
                fold: f,
                n_train: train.n_rows(),
                n_test: test.n_rows(),
                confusion,
                metrics,
                auc,
            })
        })
        .collect::<Result<_>>()?;
    let summary = |get: &dyn Fn(&FoldResult) -> Option<f64>| MetricSummary::of(folds.iter().map(get));
    Ok(CvReport {
        k,
        seed,
        smote: smote.is_some(),
        accuracy: summary(&|r| Some(r.metrics.accuracy)),
        precision: summary(&|r| r.metrics.precision),
        recall: summary(&|r| r.metrics.recall),
        specificity: summary(&|r| r.metrics.specificity),
        f1: summary(&|r| r.metrics.f1),
        auc: summary(&|r| r.auc),
        fold_of,
        folds,
    })
}

/// Per-fold metrics as CSV.
pub fn cv_csv(report: &CvReport) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut out = String::from("fold,n_train,n_test,tp,fp,tn,fn,accuracy,precision,recall,specificity,f1,auc\n");
    for r in &report.folds {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.fold,
            r.n_train,
            r.n_test,
            r.confusion.tp,
            r.confusion.fp,
            r.confusion.tn,
            r.confusion.fn_,
            r.metrics.accuracy,
            opt(r.metrics.precision),
            opt(r.metrics.recall),
            opt(r.metrics.specificity),
            opt(r.metrics.f1),
            opt(r.auc)
        );
    }
    out
}

/// One row per report, for grid summaries.
pub fn summary_table_csv(reports: &[EvalReport]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut out = String::from("scenario,model,accuracy,precision,recall,specificity,f1,auc,cv_accuracy_mean,cv_accuracy_std\n");
    for r in reports {
        let (cm, cs) = r
            .cv
            .as_ref()
            .map_or((None, None), |c| (c.accuracy.mean, c.accuracy.std));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_escape(&r.scenario),
            csv_escape(&r.model),
            r.accuracy,
            opt(r.precision),
            opt(r.recall),
            opt(r.specificity),
            opt(r.f1),
            opt(r.auc),
            opt(cm),
            opt(cs)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::TreeConfig;

    #[test]
    fn hand_filled_confusion() {
        let (cm, m) = compute_metrics(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert_eq!((cm.tp, cm.fn_, cm.tn, cm.fp), (1, 1, 2, 0));
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.precision, Some(1.0));
        assert_eq!(m.recall, Some(0.5));
        assert_eq!(m.specificity, Some(1.0));
        assert!((m.f1.unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 1, 0, 1];
        let (_, m) = compute_metrics(&y, &y).unwrap();
        assert_eq!(
            m,
            Metrics {
                accuracy: 1.0,
                precision: Some(1.0),
                recall: Some(1.0),
                specificity: Some(1.0),
                f1: Some(1.0)
            }
        );
    }

    #[test]
    fn all_negative_predictions_leave_precision_undefined() {
        let (_, m) = compute_metrics(&[1, 0, 1, 0], &[0, 0, 0, 0]).unwrap();
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.f1, None);
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"precision\":null"));
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            compute_metrics(&[1, 0], &[1]),
            Err(Error::LengthMismatch { left: 2, right: 1 })
        ));
    }

    #[test]
    fn auc_extremes_and_ties() {
        let y = [0, 0, 1, 1];
        assert_eq!(roc_auc(&y, &[0.1, 0.2, 0.8, 0.9]).unwrap().1, 1.0);
        assert_eq!(roc_auc(&y, &[0.9, 0.8, 0.2, 0.1]).unwrap().1, 0.0);
        let y6 = [1, 0, 1, 0, 1, 0];
        let s6 = [0.9, 0.7, 0.7, 0.3, 0.5, 0.1];
        // pairs: 0.9 beats all 3; 0.7 ties one, beats two; 0.5 beats two
        let expected = (3.0 + 2.5 + 2.0) / 9.0;
        let (points, auc) = roc_auc(&y6, &s6).unwrap();
        assert!((auc - expected).abs() < 1e-12);
        assert_eq!(mann_whitney_auc(&y6, &s6).unwrap(), auc);
        assert_eq!(points.first(), Some(&[0.0, 0.0]));
        assert_eq!(points.last(), Some(&[1.0, 1.0]));
        assert!(points.windows(2).all(|w| w[1][0] >= w[0][0] && w[1][1] >= w[0][1]));
    }

    #[test]
    fn single_class_auc_is_an_error() {
        assert!(matches!(roc_auc(&[1, 1], &[0.2, 0.4]), Err(Error::SingleClass)));
    }

    #[test]
    fn cv_memorizes_duplicated_rows() {
        // ten copies of each point, so every held-out row has a twin in training
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for g in 0..20 {
            for _ in 0..10 {
                rows.push(vec![g as f64, ((g * 7) % 3) as f64]);
                labels.push(((g * 5) % 3 == 0) as u8);
            }
        }
        let t = FlowTable::from_rows(&rows, &labels).unwrap();
        let cfg = ModelConfig::DecisionTree(TreeConfig {
            max_depth: 32,
            min_samples_leaf: 1,
            ..TreeConfig::default()
        });
        let report = cross_validate(&t, &cfg, 5, 3, None).unwrap();
        for (i, &f) in report.fold_of.iter().enumerate() {
            let twin = (0..t.n_rows()).any(|j| report.fold_of[j] != f && t.row(j) == t.row(i));
            assert!(twin);
        }
        assert_eq!(report.accuracy.mean, Some(1.0));
        assert_eq!(report.folds.iter().map(|r| r.n_test).sum::<usize>(), 200);
        let again = cross_validate(&t, &cfg, 5, 3, None).unwrap();
        assert_eq!(again, report);
    }
}
