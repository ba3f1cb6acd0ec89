//! Voting, stacking and blending over trained base learners.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::{self, FlowTable, SplitSpec};
use crate::learners::{
    self, Learner, LogisticConfig, LogisticRegression, ModelConfig, ModelKind, TrainedModel,
};
use crate::rng::{self, Purpose};

fn meta_config() -> LogisticConfig {
    // A light penalty keeps the meta weights finite when a base separates the
    // meta rows perfectly.
    LogisticConfig {
        l2: 1e-4,
        ..LogisticConfig::default()
    }
}

fn defaults(kinds: &[ModelKind], seed: u64) -> Vec<ModelConfig> {
    kinds.iter().map(|&k| ModelConfig::default_for(k, seed)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingSpec {
    pub members: Vec<ModelConfig>,
}

impl VotingSpec {
    /// Random forest, gradient-boosted trees and AdaBoost.
    pub fn default_with_seed(seed: u64) -> Self {
        Self {
            members: defaults(
                &[ModelKind::RandomForest, ModelKind::GradientBoosting, ModelKind::Adaboost],
                seed,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingSpec {
    pub bases: Vec<ModelConfig>,
    pub meta: LogisticConfig,
    pub n_folds: usize,
    pub seed: u64,
}

impl StackingSpec {
    /// Random forest, RBF SVM and gradient-boosted trees under a logistic
    /// meta-learner, five folds.
    pub fn default_with_seed(seed: u64) -> Self {
        Self {
            bases: defaults(
                &[ModelKind::RandomForest, ModelKind::Svm, ModelKind::GradientBoosting],
                seed,
            ),
            meta: meta_config(),
            n_folds: 5,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendingSpec {
    pub bases: Vec<ModelConfig>,
    pub meta: LogisticConfig,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl BlendingSpec {
    pub fn default_with_seed(seed: u64) -> Self {
        Self {
            bases: defaults(
                &[ModelKind::RandomForest, ModelKind::Svm, ModelKind::GradientBoosting],
                seed,
            ),
            meta: meta_config(),
            holdout_fraction: 0.2,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingEnsemble {
    pub members: Vec<TrainedModel>,
}

impl Learner for VotingEnsemble {
    fn n_features(&self) -> usize {
        self.members[0].n_features()
    }

    /// `(votes for class 1 + mean member probability) / (n + 1)`.
    ///
    /// With an odd member count this exceeds 0.5 exactly when a majority of
    /// members vote 1, and within a vote count it orders rows by soft vote.
    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        let n = self.members.len() as f64;
        let (votes, sum) = self.members.iter().fold((0.0, 0.0), |(v, s), m| {
            let p = m.predict_proba_row(row);
            (v + (p > 0.5) as u8 as f64, s + p)
        });
        (votes + sum / n) / (n + 1.0)
    }
}

/// Base probabilities followed by the meta-learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingEnsemble {
    pub bases: Vec<TrainedModel>,
    pub meta: LogisticRegression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendingEnsemble {
    pub bases: Vec<TrainedModel>,
    pub meta: LogisticRegression,
}

fn meta_row(bases: &[TrainedModel], row: &[f64]) -> Vec<f64> {
    bases.iter().map(|b| b.predict_proba_row(row)).collect()
}

impl Learner for StackingEnsemble {
    fn n_features(&self) -> usize {
        self.bases[0].n_features()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        self.meta.predict_proba_row(&meta_row(&self.bases, row))
    }
}

impl Learner for BlendingEnsemble {
    fn n_features(&self) -> usize {
        self.bases[0].n_features()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        self.meta.predict_proba_row(&meta_row(&self.bases, row))
    }
}

/// How stacking produced its meta-features.
#[derive(Debug, Clone, PartialEq)]
pub struct OofRecord {
    /// Fold of each training row.
    pub fold_of: Vec<usize>,
    /// Rows each fold's base models were trained on.
    pub fold_train_rows: Vec<Vec<usize>>,
    /// `n_rows x n_bases` out-of-fold probabilities.
    pub meta_features: FlowTable,
}

/// Row partition used by blending.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendPartition {
    pub base_rows: Vec<usize>,
    pub holdout_rows: Vec<usize>,
    pub meta_features: FlowTable,
}

fn check_bases(bases: &[ModelConfig]) -> Result<()> {
    if bases.is_empty() {
        return Err(Error::InvalidConfig("ensemble needs at least one base learner".into()));
    }
    Ok(())
}

fn meta_names(bases: &[ModelConfig]) -> Vec<String> {
    bases
        .iter()
        .enumerate()
        .map(|(i, b)| format!("base{i}_{}", b.kind()))
        .collect()
}

fn fit_all(configs: &[ModelConfig], table: &FlowTable) -> Result<Vec<TrainedModel>> {
    configs.par_iter().map(|c| c.fit(table)).collect()
}

pub fn train_voting(table: &FlowTable, spec: &VotingSpec) -> Result<VotingEnsemble> {
    let n = spec.members.len();
    if n.is_multiple_of(2) {
        return Err(Error::EvenMemberCount(n));
    }
    if n < 3 {
        return Err(Error::InvalidConfig(format!("voting needs at least 3 members, got {n}")));
    }
    Ok(VotingEnsemble {
        members: fit_all(&spec.members, table)?,
    })
}

pub fn train_stacking(table: &FlowTable, spec: &StackingSpec) -> Result<StackingEnsemble> {
    train_stacking_detailed(table, spec).map(|(m, _)| m)
}

/// Out-of-fold meta-features: row `i` is scored only by base models fitted
/// on the folds that exclude it.
pub fn stacking_oof(table: &FlowTable, spec: &StackingSpec) -> Result<OofRecord> {
    check_bases(&spec.bases)?;
    if spec.n_folds < 2 {
        return Err(Error::FoldTooSmall(format!("stacking needs at least 2 folds, got {}", spec.n_folds)));
    }
    let fold_of = flowdata::stratified_folds(table.labels(), spec.n_folds, spec.seed)?;
    let k = spec.n_folds;
    let fold_train_rows: Vec<Vec<usize>> = (0..k)
        .map(|f| (0..table.n_rows()).filter(|&i| fold_of[i] != f).collect())
        .collect();
    let jobs: Vec<(usize, usize)> = (0..k).flat_map(|f| (0..spec.bases.len()).map(move |b| (f, b))).collect();
    let models: Vec<TrainedModel> = jobs
        .par_iter()
        .map(|&(f, b)| spec.bases[b].fit(&table.subset(&fold_train_rows[f])))
        .collect::<Result<_>>()?;
    let n_bases = spec.bases.len();
    let mut meta = vec![0.0; table.n_rows() * n_bases];
    for (i, row) in table.rows().enumerate() {
        let f = fold_of[i];
        for b in 0..n_bases {
            meta[i * n_bases + b] = models[f * n_bases + b].predict_proba_row(row);
        }
    }
    let meta_features = FlowTable::new(meta_names(&spec.bases), meta, table.labels().to_vec())?;
    Ok(OofRecord {
        fold_of,
        fold_train_rows,
        meta_features,
    })
}

pub fn train_stacking_detailed(table: &FlowTable, spec: &StackingSpec) -> Result<(StackingEnsemble, OofRecord)> {
    let record = stacking_oof(table, spec)?;
    let meta = learners::train_logistic_regression(&record.meta_features, &spec.meta)?;
    let bases = fit_all(&spec.bases, table)?;
    Ok((StackingEnsemble { bases, meta }, record))
}

pub fn train_blending(table: &FlowTable, spec: &BlendingSpec) -> Result<BlendingEnsemble> {
    train_blending_detailed(table, spec).map(|(m, _)| m)
}

pub fn train_blending_detailed(table: &FlowTable, spec: &BlendingSpec) -> Result<(BlendingEnsemble, BlendPartition)> {
    check_bases(&spec.bases)?;
    if !(spec.holdout_fraction > 0.0 && spec.holdout_fraction <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction must lie in (0, 0.5], got {}",
            spec.holdout_fraction
        )));
    }
    let split = SplitSpec {
        train_fraction: 1.0 - spec.holdout_fraction,
        seed: rng::hash3(spec.seed, Purpose::Blending, 0),
        stratified: true,
    };
    let (base_rows, holdout_rows) = flowdata::split_indices(table.labels(), &split)
        .map_err(|e| Error::DegenerateHoldout(e.to_string()))?;
    let holdout = table.subset(&holdout_rows);
    let counts = holdout.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::DegenerateHoldout(format!(
            "holdout has {} benign and {} keylogger rows",
            counts[0], counts[1]
        )));
    }
    let bases = fit_all(&spec.bases, &table.subset(&base_rows))?;
    let mut meta = Vec::with_capacity(holdout.n_rows() * bases.len());
    for row in holdout.rows() {
        meta.extend(meta_row(&bases, row));
    }
    let meta_features = FlowTable::new(meta_names(&spec.bases), meta, holdout.labels().to_vec())?;
    let meta_model = learners::train_logistic_regression(&meta_features, &spec.meta)?;
    Ok((
        BlendingEnsemble {
            bases,
            meta: meta_model,
        },
        BlendPartition {
            base_rows,
            holdout_rows,
            meta_features,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::TreeConfig;

    fn constant(label: u8) -> TrainedModel {
        TrainedModel::LogisticRegression(LogisticRegression {
            weights: vec![0.0],
            intercept: if label == 1 { 3.0 } else { -3.0 },
            iterations: 0,
            gradient_norm: 0.0,
            converged: true,
        })
    }

    fn toy(n: usize) -> FlowTable {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin(), (t * 0.11).cos(), (i % 7) as f64 / 7.0]
            })
            .collect();
        let labels: Vec<u8> = rows.iter().map(|r| (r[0] + 0.5 * r[1] > 0.2) as u8).collect();
        FlowTable::from_rows(&rows, &labels).unwrap()
    }

    fn small_tree(seed: u64) -> ModelConfig {
        ModelConfig::DecisionTree(TreeConfig {
            max_depth: 3,
            min_samples_leaf: 2,
            seed,
            ..TreeConfig::default()
        })
    }

    #[test]
    fn voting_follows_majority_for_every_pattern() {
        for pattern in 0u8..8 {
            let votes = [pattern & 1, (pattern >> 1) & 1, (pattern >> 2) & 1];
            let ens = VotingEnsemble {
                members: votes.iter().map(|&v| constant(v)).collect(),
            };
            let expected = (votes.iter().filter(|&&v| v == 1).count() >= 2) as u8;
            assert_eq!(ens.predict_row(&[0.0]), expected, "{votes:?}");
            let p = ens.predict_proba_row(&[0.0]);
            assert!((0.0..=1.0).contains(&p) && (p > 0.5) == (expected == 1));
        }
    }

    #[test]
    fn identical_members_match_the_member() {
        let t = toy(60);
        let spec = VotingSpec {
            members: vec![small_tree(1); 3],
        };
        let ens = train_voting(&t, &spec).unwrap();
        let single = small_tree(1).fit(&t).unwrap();
        assert_eq!(ens.predict(&t), single.predict(&t));
        let (a, b) = (ens.predict_proba(&t), single.predict_proba(&t));
        for i in 0..a.len() {
            for k in 0..a.len() {
                assert_eq!(a[i] < a[k], b[i] < b[k]);
            }
        }
    }

    #[test]
    fn even_member_count_is_rejected() {
        let spec = VotingSpec {
            members: vec![small_tree(1); 4],
        };
        assert!(matches!(train_voting(&toy(20), &spec), Err(Error::EvenMemberCount(4))));
    }

    #[test]
    fn stacking_meta_features_are_out_of_fold() {
        let t = toy(50);
        let spec = StackingSpec {
            bases: vec![small_tree(3), ModelConfig::NaiveBayes],
            meta: meta_config(),
            n_folds: 5,
            seed: 9,
        };
        let rec = stacking_oof(&t, &spec).unwrap();
        assert_eq!(rec.meta_features.n_rows(), 50);
        assert_eq!(rec.meta_features.n_features(), 2);
        for (i, &f) in rec.fold_of.iter().enumerate() {
            assert!(!rec.fold_train_rows[f].contains(&i));
        }
    }

    #[test]
    fn oracle_base_carries_the_stack() {
        // feature 0 is the label itself
        let rows: Vec<Vec<f64>> = (0..80).map(|i| vec![((i * 13) % 5 < 2) as u8 as f64, (i as f64 * 0.7).sin()]).collect();
        let labels: Vec<u8> = rows.iter().map(|r| r[0] as u8).collect();
        let t = FlowTable::from_rows(&rows, &labels).unwrap();
        let (train, test) = flowdata::train_test_split(&t, &SplitSpec::default()).unwrap();
        let spec = StackingSpec {
            bases: vec![small_tree(1), ModelConfig::NaiveBayes],
            meta: meta_config(),
            n_folds: 4,
            seed: 1,
        };
        let model = train_stacking(&train, &spec).unwrap();
        assert_eq!(model.predict(&test), test.labels());
    }

    #[test]
    fn blending_partition_is_disjoint() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0, ((i * 7) % 10) as f64]).collect();
        let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let t = FlowTable::from_rows(&rows, &labels).unwrap();
        let spec = BlendingSpec {
            bases: vec![small_tree(2), ModelConfig::NaiveBayes],
            meta: meta_config(),
            holdout_fraction: 0.2,
            seed: 5,
        };
        let (_, part) = train_blending_detailed(&t, &spec).unwrap();
        assert_eq!(part.base_rows.len(), 80);
        assert_eq!(part.holdout_rows.len(), 20);
        assert!(part.base_rows.iter().all(|r| !part.holdout_rows.contains(r)));
    }
}
