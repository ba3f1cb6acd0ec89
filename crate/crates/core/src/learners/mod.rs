//! Base classifiers and the common [`Learner`] interface.
//!
//! Every model outputs the probability of class 1 (keylogger). Hard labels
//! are `proba > 0.5`, so an exact 0.5 goes to class 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::{
    self, BlendingEnsemble, BlendingSpec, StackingEnsemble, StackingSpec, VotingEnsemble, VotingSpec,
};
use crate::error::{Error, Result};
use crate::flowdata::FlowTable;

pub mod adaboost;
pub mod forest;
pub mod gbdt;
pub mod logistic;
pub mod naive_bayes;
pub mod svm;
pub mod tree;

pub use adaboost::{train_adaboost, AdaBoost, AdaBoostConfig};
pub use forest::{train_random_forest, ForestConfig, RandomForest};
pub use gbdt::{train_gradient_boosted_trees, BoostLoss, GbdtConfig, GradientBoosting};
pub use logistic::{train_logistic_regression, LogisticConfig, LogisticRegression};
pub use naive_bayes::{train_naive_bayes, NaiveBayes};
pub use svm::{train_svm_rbf, Svm, SvmConfig};
pub use tree::{train_decision_tree, DecisionTree, MaxFeatures, TreeConfig};

pub trait Learner: Send + Sync {
    fn n_features(&self) -> usize;

    /// Probability of class 1 for one row.
    fn predict_proba_row(&self, row: &[f64]) -> f64;

    fn predict_row(&self, row: &[f64]) -> u8 {
        (self.predict_proba_row(row) > 0.5) as u8
    }

    fn predict_proba(&self, table: &FlowTable) -> Vec<f64> {
        table.rows().map(|r| self.predict_proba_row(r)).collect()
    }

    fn predict(&self, table: &FlowTable) -> Vec<u8> {
        table.rows().map(|r| self.predict_row(r)).collect()
    }
}

/// Logistic function, stable for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DecisionTree,
    RandomForest,
    Adaboost,
    GradientBoosting,
    LogisticRegression,
    NaiveBayes,
    Svm,
    Voting,
    Stacking,
    Blending,
}

impl ModelKind {
    pub const ALL: [ModelKind; 10] = [
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::Adaboost,
        ModelKind::GradientBoosting,
        ModelKind::LogisticRegression,
        ModelKind::NaiveBayes,
        ModelKind::Svm,
        ModelKind::Voting,
        ModelKind::Stacking,
        ModelKind::Blending,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Adaboost => "adaboost",
            ModelKind::GradientBoosting => "gradient_boosting",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::Svm => "svm",
            ModelKind::Voting => "voting",
            ModelKind::Stacking => "stacking",
            ModelKind::Blending => "blending",
        }
    }

    pub fn is_ensemble(self) -> bool {
        matches!(self, ModelKind::Voting | ModelKind::Stacking | ModelKind::Blending)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let kind = match key.as_str() {
            "decisiontree" | "tree" | "cart" | "dt" => ModelKind::DecisionTree,
            "randomforest" | "forest" | "rf" => ModelKind::RandomForest,
            "adaboost" | "ada" => ModelKind::Adaboost,
            "gradientboosting" | "gbdt" | "gbt" | "xgboost" | "xgb" => ModelKind::GradientBoosting,
            "logisticregression" | "logistic" | "logreg" | "lr" => ModelKind::LogisticRegression,
            "naivebayes" | "nb" | "gaussiannb" => ModelKind::NaiveBayes,
            "svm" | "svc" => ModelKind::Svm,
            "voting" | "vote" => ModelKind::Voting,
            "stacking" | "stack" => ModelKind::Stacking,
            "blending" | "blend" => ModelKind::Blending,
            _ => return Err(Error::InvalidConfig(format!("unknown model '{s}'"))),
        };
        Ok(kind)
    }
}

/// Hyperparameters for any of the ten models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelConfig {
    DecisionTree(TreeConfig),
    RandomForest(ForestConfig),
    Adaboost(AdaBoostConfig),
    GradientBoosting(GbdtConfig),
    LogisticRegression(LogisticConfig),
    NaiveBayes,
    Svm(SvmConfig),
    Voting(VotingSpec),
    Stacking(StackingSpec),
    Blending(BlendingSpec),
}

impl ModelConfig {
    /// Library defaults with `seed` threaded through every randomized part.
    ///
    /// The SVM default opts into stratified subsampling above its row cap so
    /// full-grid runs do not abort; the choice is recorded in the run config.
    pub fn default_for(kind: ModelKind, seed: u64) -> ModelConfig {
        match kind {
            ModelKind::DecisionTree => ModelConfig::DecisionTree(TreeConfig {
                seed,
                ..TreeConfig::default()
            }),
            ModelKind::RandomForest => ModelConfig::RandomForest(ForestConfig {
                seed,
                ..ForestConfig::default()
            }),
            ModelKind::Adaboost => ModelConfig::Adaboost(AdaBoostConfig {
                seed,
                ..AdaBoostConfig::default()
            }),
            ModelKind::GradientBoosting => ModelConfig::GradientBoosting(GbdtConfig {
                seed,
                ..GbdtConfig::default()
            }),
            ModelKind::LogisticRegression => ModelConfig::LogisticRegression(LogisticConfig::default()),
            ModelKind::NaiveBayes => ModelConfig::NaiveBayes,
            ModelKind::Svm => ModelConfig::Svm(SvmConfig {
                seed,
                auto_subsample: true,
                ..SvmConfig::default()
            }),
            ModelKind::Voting => ModelConfig::Voting(VotingSpec::default_with_seed(seed)),
            ModelKind::Stacking => ModelConfig::Stacking(StackingSpec::default_with_seed(seed)),
            ModelKind::Blending => ModelConfig::Blending(BlendingSpec::default_with_seed(seed)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::DecisionTree(_) => ModelKind::DecisionTree,
            ModelConfig::RandomForest(_) => ModelKind::RandomForest,
            ModelConfig::Adaboost(_) => ModelKind::Adaboost,
            ModelConfig::GradientBoosting(_) => ModelKind::GradientBoosting,
            ModelConfig::LogisticRegression(_) => ModelKind::LogisticRegression,
            ModelConfig::NaiveBayes => ModelKind::NaiveBayes,
            ModelConfig::Svm(_) => ModelKind::Svm,
            ModelConfig::Voting(_) => ModelKind::Voting,
            ModelConfig::Stacking(_) => ModelKind::Stacking,
            ModelConfig::Blending(_) => ModelKind::Blending,
        }
    }

    pub fn fit(&self, table: &FlowTable) -> Result<TrainedModel> {
        Ok(match self {
            ModelConfig::DecisionTree(c) => TrainedModel::DecisionTree(train_decision_tree(table, c)?),
            ModelConfig::RandomForest(c) => TrainedModel::RandomForest(train_random_forest(table, c)?),
            ModelConfig::Adaboost(c) => TrainedModel::Adaboost(train_adaboost(table, c)?),
            ModelConfig::GradientBoosting(c) => {
                TrainedModel::GradientBoosting(train_gradient_boosted_trees(table, c)?)
            }
            ModelConfig::LogisticRegression(c) => {
                TrainedModel::LogisticRegression(train_logistic_regression(table, c)?)
            }
            ModelConfig::NaiveBayes => TrainedModel::NaiveBayes(train_naive_bayes(table)?),
            ModelConfig::Svm(c) => TrainedModel::Svm(train_svm_rbf(table, c)?),
            ModelConfig::Voting(s) => TrainedModel::Voting(Box::new(ensemble::train_voting(table, s)?)),
            ModelConfig::Stacking(s) => TrainedModel::Stacking(Box::new(ensemble::train_stacking(table, s)?)),
            ModelConfig::Blending(s) => TrainedModel::Blending(Box::new(ensemble::train_blending(table, s)?)),
        })
    }
}

/// A fitted model of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainedModel {
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    Adaboost(AdaBoost),
    GradientBoosting(GradientBoosting),
    LogisticRegression(LogisticRegression),
    NaiveBayes(NaiveBayes),
    Svm(Svm),
    Voting(Box<VotingEnsemble>),
    Stacking(Box<StackingEnsemble>),
    Blending(Box<BlendingEnsemble>),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::DecisionTree(_) => ModelKind::DecisionTree,
            TrainedModel::RandomForest(_) => ModelKind::RandomForest,
            TrainedModel::Adaboost(_) => ModelKind::Adaboost,
            TrainedModel::GradientBoosting(_) => ModelKind::GradientBoosting,
            TrainedModel::LogisticRegression(_) => ModelKind::LogisticRegression,
            TrainedModel::NaiveBayes(_) => ModelKind::NaiveBayes,
            TrainedModel::Svm(_) => ModelKind::Svm,
            TrainedModel::Voting(_) => ModelKind::Voting,
            TrainedModel::Stacking(_) => ModelKind::Stacking,
            TrainedModel::Blending(_) => ModelKind::Blending,
        }
    }

    fn inner(&self) -> &dyn Learner {
        match self {
            TrainedModel::DecisionTree(m) => m,
            TrainedModel::RandomForest(m) => m,
            TrainedModel::Adaboost(m) => m,
            TrainedModel::GradientBoosting(m) => m,
            TrainedModel::LogisticRegression(m) => m,
            TrainedModel::NaiveBayes(m) => m,
            TrainedModel::Svm(m) => m,
            TrainedModel::Voting(m) => m.as_ref(),
            TrainedModel::Stacking(m) => m.as_ref(),
            TrainedModel::Blending(m) => m.as_ref(),
        }
    }

    /// Human-readable notes for every solver that stopped short, including
    /// those inside ensembles.
    pub fn convergence_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_warnings("", &mut out);
        out
    }

    fn collect_warnings(&self, prefix: &str, out: &mut Vec<String>) {
        let here = format!("{prefix}{}", self.kind());
        match self {
            TrainedModel::LogisticRegression(m) if !m.converged => out.push(format!(
                "{here}: did not converge (gradient norm {:.3e} after {} iterations)",
                m.gradient_norm, m.iterations
            )),
            TrainedModel::Svm(m) if !m.converged => {
                out.push(format!("{here}: SMO stopped before reaching the KKT tolerance"))
            }
            TrainedModel::Voting(e) => {
                for m in &e.members {
                    m.collect_warnings(&format!("{here}/"), out);
                }
            }
            TrainedModel::Stacking(e) => {
                for m in &e.bases {
                    m.collect_warnings(&format!("{here}/"), out);
                }
                TrainedModel::LogisticRegression(e.meta.clone()).collect_warnings(&format!("{here}/meta:"), out);
            }
            TrainedModel::Blending(e) => {
                for m in &e.bases {
                    m.collect_warnings(&format!("{here}/"), out);
                }
                TrainedModel::LogisticRegression(e.meta.clone()).collect_warnings(&format!("{here}/meta:"), out);
            }
            _ => {}
        }
    }
}

impl Learner for TrainedModel {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn predict_proba_row(&self, row: &[f64]) -> f64 {
        self.inner().predict_proba_row(row)
    }

    fn predict_row(&self, row: &[f64]) -> u8 {
        self.inner().predict_row(row)
    }
}
