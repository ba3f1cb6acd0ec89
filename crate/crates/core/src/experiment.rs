//! End-to-end runs: load, split, scale, resample, select, train, evaluate,
//! and write artifacts.
//!
//! Artifacts carry no timestamps or timings, so re-running a directory's
//! `config.json` reproduces every JSON and CSV byte for byte.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::error::{Error, Result};
use crate::evaluate::{self, EvalReport};
use crate::featsel::{self, FeatureRanking, LassoConfig};
use crate::flowdata::{self, FlowTable, LoadOptions, LoadedTable, SanitizeReport, ScalerParams, SplitSpec};
use crate::learners::{Learner, ModelConfig, ModelKind};
use crate::resample::{self, SmoteConfig};
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    All,
    InfoGain,
    LassoL1,
    FisherScore,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::All, Scenario::InfoGain, Scenario::LassoL1, Scenario::FisherScore];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::All => "all",
            Scenario::InfoGain => "info_gain",
            Scenario::LassoL1 => "lasso_l1",
            Scenario::FisherScore => "fisher_score",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect();
        Ok(match key.as_str() {
            "all" | "none" => Scenario::All,
            "infogain" | "ig" | "informationgain" => Scenario::InfoGain,
            "lassol1" | "lasso" | "l1" => Scenario::LassoL1,
            "fisherscore" | "fisher" => Scenario::FisherScore,
            _ => return Err(Error::InvalidConfig(format!("unknown scenario '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub ig_bins: usize,
    pub ig_threshold: f64,
    pub fisher_top_k: usize,
    pub lasso: LassoConfig,
}

impl SelectionConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            ig_bins: 10,
            ig_threshold: featsel::IG_THRESHOLD,
            fisher_top_k: featsel::FISHER_TOP_K,
            lasso: LassoConfig {
                seed,
                ..LassoConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
}

/// Everything that determines a run. Written as `config.json` beside the
/// outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub drop_columns: Vec<String>,
    pub label_column: Option<String>,
    pub scenario: Scenario,
    pub model: ModelConfig,
    /// `None` disables SMOTE.
    pub smote: Option<SmoteConfig>,
    pub split: SplitSpec,
    pub selection: SelectionConfig,
    /// `None` disables cross-validation.
    pub cv: Option<CvConfig>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub svg: bool,
}

impl ExperimentConfig {
    /// Defaults for `kind` with one seed threaded through every stage.
    pub fn new(data: PathBuf, output_dir: PathBuf, scenario: Scenario, kind: ModelKind, seed: u64) -> Self {
        Self {
            data,
            drop_columns: flowdata::DEFAULT_DROP_COLUMNS.iter().map(|s| s.to_string()).collect(),
            label_column: None,
            scenario,
            model: ModelConfig::default_for(kind, seed),
            smote: Some(SmoteConfig {
                seed,
                ..SmoteConfig::default()
            }),
            split: SplitSpec {
                seed,
                ..SplitSpec::default()
            },
            selection: SelectionConfig::with_seed(seed),
            cv: None,
            seed,
            output_dir,
            svg: false,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            drop_columns: self.drop_columns.clone(),
            label_column: self.label_column.clone(),
        }
    }
}

/// Train/test partitions after scaling, resampling and selection.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub input_feature_names: Vec<String>,
    pub scaler: ScalerParams,
    pub ranking: Option<FeatureRanking>,
    pub selected: Vec<usize>,
    /// Scaled, selected training rows before SMOTE (used for CV).
    pub train_original: FlowTable,
    /// Training rows the model is fitted on.
    pub train: FlowTable,
    pub test: FlowTable,
    pub warnings: Vec<String>,
}

/// Counts describing one run; deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub model: ModelKind,
    pub n_rows_loaded: usize,
    pub n_input_features: usize,
    pub label_column: String,
    pub label_classes: Vec<(String, u8)>,
    pub sanitize: SanitizeReport,
    pub train_class_counts: [usize; 2],
    pub train_class_counts_after_smote: [usize; 2],
    pub test_class_counts: [usize; 2],
    pub n_selected_features: usize,
    pub selected_features: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub summary: RunSummary,
    pub bundle: ModelBundle,
    pub ranking: Option<FeatureRanking>,
    pub warnings: Vec<String>,
    pub output_dir: PathBuf,
}

pub fn load(config: &ExperimentConfig) -> Result<LoadedTable> {
    let loaded = flowdata::load_csv_with(&config.data, &config.load_options())?;
    log::info!(
        "loaded {} rows x {} features from {}",
        loaded.table.n_rows(),
        loaded.table.n_features(),
        config.data.display()
    );
    Ok(loaded)
}

/// Ranks features of `train` for a scenario; `None` for [`Scenario::All`].
pub fn select_features(
    train: &FlowTable,
    scenario: Scenario,
    selection: &SelectionConfig,
    warnings: &mut Vec<String>,
) -> Result<Option<FeatureRanking>> {
    let ranking = match scenario {
        Scenario::All => return Ok(None),
        Scenario::InfoGain => featsel::information_gain_with_threshold(train, selection.ig_bins, selection.ig_threshold)?,
        Scenario::FisherScore => featsel::fisher_score(train, selection.fisher_top_k)?,
        Scenario::LassoL1 => {
            let (ranking, fit) = featsel::lasso_select_detailed(train, &selection.lasso)?;
            if !fit.converged {
                warnings.push(format!(
                    "lasso: did not converge in {} sweeps (KKT residual {:.3e})",
                    fit.sweeps, fit.kkt_residual
                ));
            }
            ranking
        }
    };
    if ranking.selected.is_empty() {
        return Err(Error::InvalidConfig(format!("{scenario} selection kept no features")));
    }
    Ok(Some(ranking))
}

/// Split, scale (fitted on train), resample train, select on train.
pub fn prepare(config: &ExperimentConfig, loaded: &LoadedTable) -> Result<PreparedData> {
    let table = &loaded.table;
    let (train_idx, test_idx) = flowdata::split_indices(table.labels(), &config.split)?;
    let (train_raw, test_raw) = (table.subset(&train_idx), table.subset(&test_idx));
    let scaler = flowdata::fit_minmax(&train_raw)?;
    let train_scaled = flowdata::apply_minmax(&train_raw, &scaler)?;
    let test_scaled = flowdata::apply_minmax(&test_raw, &scaler)?;
    let train_resampled = match &config.smote {
        Some(cfg) => resample::smote(&train_scaled, cfg)?,
        None => train_scaled.clone(),
    };
    let mut warnings = Vec::new();
    let ranking = select_features(&train_resampled, config.scenario, &config.selection, &mut warnings)?;
    let selected: Vec<usize> = match &ranking {
        Some(r) => r.selected.clone(),
        None => (0..table.n_features()).collect(),
    };
    Ok(PreparedData {
        input_feature_names: table.feature_names().to_vec(),
        scaler,
        train_original: train_scaled.select_columns(&selected)?,
        train: train_resampled.select_columns(&selected)?,
        test: test_scaled.select_columns(&selected)?,
        ranking,
        selected,
        warnings,
    })
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Trains and evaluates on prepared data and writes all artifacts into
/// `config.output_dir`.
pub fn run_prepared(config: &ExperimentConfig, loaded: &LoadedTable, data: &PreparedData) -> Result<RunOutcome> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let kind = config.model.kind();
    log::info!(
        "{}/{}: training on {} rows x {} features",
        config.scenario,
        kind,
        data.train.n_rows(),
        data.train.n_features()
    );
    let model = config.model.fit(&data.train)?;
    let mut warnings = data.warnings.clone();
    warnings.extend(model.convergence_warnings());

    let mut report = EvalReport::evaluate(&model, &data.test, kind.name(), config.scenario.name())?;
    if let Some(cv) = &config.cv {
        let mut cv_report =
            evaluate::cross_validate(&data.train_original, &config.model, cv.k, cv.seed, config.smote.as_ref())?;
        cv_report.fold_of.clear();
        report.cv = Some(cv_report);
    }

    let bundle = ModelBundle::new(data.input_feature_names.clone(), data.scaler.clone(), data.selected.clone(), model);
    let summary = RunSummary {
        scenario: config.scenario,
        model: kind,
        n_rows_loaded: loaded.table.n_rows(),
        n_input_features: loaded.table.n_features(),
        label_column: loaded.label_column.clone(),
        label_classes: loaded.encoding.classes.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        sanitize: loaded.sanitize.clone(),
        train_class_counts: data.train_original.class_counts(),
        train_class_counts_after_smote: data.train.class_counts(),
        test_class_counts: data.test.class_counts(),
        n_selected_features: data.selected.len(),
        selected_features: data.train.feature_names().to_vec(),
        warnings: warnings.clone(),
    };

    write(dir, "config.json", config.to_json()?)?;
    write(dir, "eval_report.json", report.to_json()?)?;
    write(dir, "run_summary.json", serde_json::to_string_pretty(&summary)? + "\n")?;
    write(dir, "roc.csv", report.roc_csv())?;
    write(dir, "confusion.csv", report.confusion.to_csv())?;
    if let Some(cv) = &report.cv {
        write(dir, "cv_folds.csv", evaluate::cv_csv(cv))?;
    }
    if let Some(r) = &data.ranking {
        write(dir, "ranking.json", r.to_json()? + "\n")?;
        write(dir, "feature_scores.csv", r.scores_csv())?;
    }
    bundle.save(&dir.join(bundle.file_name()))?;
    if config.svg {
        let title = format!("{} / {}", config.scenario, kind);
        write(dir, "roc.svg", svg::roc_chart(&format!("ROC: {title}"), &report.roc_points, report.auc))?;
        write(dir, "confusion.svg", svg::confusion_chart(&format!("Confusion: {title}"), &report.confusion))?;
        if let Some(r) = &data.ranking {
            write(dir, "feature_scores.svg", ranking_svg(r, 30))?;
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(RunOutcome {
        report,
        summary,
        bundle,
        ranking: data.ranking.clone(),
        warnings,
        output_dir: dir.clone(),
    })
}

/// Bar chart of the `top` highest scores.
pub fn ranking_svg(r: &FeatureRanking, top: usize) -> String {
    let order: Vec<usize> = r.ranked().into_iter().take(top).collect();
    let names: Vec<String> = order
        .iter()
        .map(|&j| r.feature_names.get(j).cloned().unwrap_or_else(|| format!("f{j}")))
        .collect();
    let values: Vec<f64> = order.iter().map(|&j| r.scores[j]).collect();
    let method = serde_json::to_value(r.method).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    svg::bar_chart(&format!("Feature scores ({method})"), &names, &values)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    let loaded = load(config)?;
    let data = prepare(config, &loaded)?;
    run_prepared(config, &loaded, &data)
}

/// One grid cell's headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub scenario: Scenario,
    pub model: ModelKind,
    pub output_dir: PathBuf,
    pub n_features: usize,
    pub report: EvalReport,
    pub warnings: Vec<String>,
}

/// Runs every (scenario, model) pair from `base`, each in
/// `<output_dir>/<scenario>/<model>/`, and writes `grid_summary.{csv,json}`.
/// Preparation is shared per scenario and cells train in parallel.
pub fn run_grid(base: &ExperimentConfig, scenarios: &[Scenario], models: &[ModelKind]) -> Result<Vec<GridCell>> {
    let loaded = load(base)?;
    let prepared: Vec<(Scenario, PreparedData)> = scenarios
        .par_iter()
        .map(|&s| {
            let cfg = ExperimentConfig {
                scenario: s,
                ..base.clone()
            };
            prepare(&cfg, &loaded).map(|p| (s, p))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, ModelKind)> = (0..prepared.len())
        .flat_map(|i| models.iter().map(move |&m| (i, m)))
        .collect();
    let cells: Vec<GridCell> = jobs
        .par_iter()
        .map(|&(i, kind)| {
            let (scenario, data) = &prepared[i];
            let cfg = cell_config(base, *scenario, kind);
            let out = run_prepared(&cfg, &loaded, data)?;
            Ok(GridCell {
                scenario: *scenario,
                model: kind,
                output_dir: cfg.output_dir,
                n_features: data.selected.len(),
                report: out.report,
                warnings: out.warnings,
            })
        })
        .collect::<Result<_>>()?;
    let dir = &base.output_dir;
    let reports: Vec<EvalReport> = cells.iter().map(|c| c.report.clone()).collect();
    write(dir, "grid_summary.csv", evaluate::summary_table_csv(&reports))?;
    write(dir, "grid_summary.json", serde_json::to_string_pretty(&cells)? + "\n")?;
    if base.svg {
        let groups: Vec<String> = models.iter().map(|m| m.name().to_string()).collect();
        let series: Vec<String> = scenarios.iter().map(|s| s.name().to_string()).collect();
        let values: Vec<Vec<Option<f64>>> = models
            .iter()
            .map(|&m| {
                scenarios
                    .iter()
                    .map(|&s| cells.iter().find(|c| c.model == m && c.scenario == s).map(|c| c.report.accuracy))
                    .collect()
            })
            .collect();
        write(dir, "grid_accuracy.svg", svg::grouped_bar_chart("Test accuracy by model and feature set", &groups, &series, &values))?;
    }
    Ok(cells)
}

/// The config a grid cell runs with (model defaults re-seeded from `base`).
pub fn cell_config(base: &ExperimentConfig, scenario: Scenario, kind: ModelKind) -> ExperimentConfig {
    let model = if base.model.kind() == kind {
        base.model.clone()
    } else {
        ModelConfig::default_for(kind, base.seed)
    };
    ExperimentConfig {
        scenario,
        model,
        output_dir: base.output_dir.join(scenario.name()).join(kind.name()),
        ..base.clone()
    }
}

/// Selection only: ranks features on the (resampled, scaled) training split.
pub fn run_selection(config: &ExperimentConfig) -> Result<Option<FeatureRanking>> {
    let loaded = load(config)?;
    let data = prepare(config, &loaded)?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "config.json", config.to_json()?)?;
    if let Some(r) = &data.ranking {
        write(dir, "ranking.json", r.to_json()? + "\n")?;
        write(dir, "feature_scores.csv", r.scores_csv())?;
        if config.svg {
            write(dir, "feature_scores.svg", ranking_svg(r, 30))?;
        }
    }
    write(dir, "feature_summary.csv", flowdata::summary_csv(&loaded.table))?;
    Ok(data.ranking)
}

/// Score of a single model against prepared test data, for callers that
/// already hold one.
pub fn test_accuracy(model: &dyn Learner, test: &FlowTable) -> Result<f64> {
    Ok(evaluate::compute_metrics(test.labels(), &model.predict(test))?.1.accuracy)
}

/// Small hyperparameter grid around the defaults of `kind`. Models without
/// an obvious knob get a single candidate.
pub fn tuning_candidates(kind: ModelKind, seed: u64) -> Vec<ModelConfig> {
    let base = ModelConfig::default_for(kind, seed);
    match base {
        ModelConfig::DecisionTree(c) => [4, 8, 16]
            .map(|d| ModelConfig::DecisionTree(crate::learners::TreeConfig { max_depth: d, ..c }))
            .to_vec(),
        ModelConfig::RandomForest(c) => [50, 100, 200]
            .map(|n| ModelConfig::RandomForest(crate::learners::ForestConfig { n_trees: n, ..c }))
            .to_vec(),
        ModelConfig::Adaboost(c) => [50, 100, 200]
            .map(|n| ModelConfig::Adaboost(crate::learners::AdaBoostConfig { n_rounds: n, ..c }))
            .to_vec(),
        ModelConfig::GradientBoosting(c) => [0.05, 0.1, 0.3]
            .map(|lr| ModelConfig::GradientBoosting(crate::learners::GbdtConfig { learning_rate: lr, ..c }))
            .to_vec(),
        ModelConfig::LogisticRegression(c) => [1e-4, 1e-2, 1.0]
            .map(|l2| ModelConfig::LogisticRegression(crate::learners::LogisticConfig { l2, ..c }))
            .to_vec(),
        ModelConfig::Svm(c) => [0.5, 1.0, 4.0]
            .map(|cost| ModelConfig::Svm(crate::learners::SvmConfig { c: cost, ..c }))
            .to_vec(),
        other => vec![other],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub config: ModelConfig,
    pub cv: evaluate::CvReport,
}

/// k-fold CV over [`tuning_candidates`]; results sorted by descending mean
/// accuracy (ties keep grid order).
pub fn tune(
    train: &FlowTable,
    kind: ModelKind,
    seed: u64,
    k: usize,
    smote: Option<&SmoteConfig>,
) -> Result<Vec<TuningResult>> {
    let mut results: Vec<TuningResult> = tuning_candidates(kind, seed)
        .into_iter()
        .map(|config| {
            let mut cv = evaluate::cross_validate(train, &config, k, seed, smote)?;
            cv.fold_of.clear();
            Ok(TuningResult { config, cv })
        })
        .collect::<Result<_>>()?;
    let acc = |r: &TuningResult| r.cv.accuracy.mean.unwrap_or(f64::NEG_INFINITY);
    results.sort_by(|a, b| acc(b).total_cmp(&acc(a)));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn fixture_file(dir: &Path, rows: usize) -> PathBuf {
        let p = dir.join("flows.csv");
        fs::write(&p, fixture::synthetic_flows_csv(rows, 11)).unwrap();
        p
    }

    #[test]
    fn scenario_names_parse() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert_eq!("Fisher".parse::<Scenario>().unwrap(), Scenario::FisherScore);
    }

    #[test]
    fn config_round_trips() {
        let cfg = ExperimentConfig::new("a.csv".into(), "out".into(), Scenario::LassoL1, ModelKind::Stacking, 5);
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn run_writes_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let data = fixture_file(tmp.path(), 300);
        let out = tmp.path().join("run");
        let mut cfg = ExperimentConfig::new(data, out.clone(), Scenario::FisherScore, ModelKind::DecisionTree, 1);
        cfg.selection.fisher_top_k = 8;
        cfg.svg = true;
        let outcome = run_experiment(&cfg).unwrap();
        assert!((0.0..=1.0).contains(&outcome.report.accuracy));
        assert_eq!(outcome.summary.n_selected_features, 8);
        for f in ["config.json", "eval_report.json", "ranking.json", "roc.csv", "confusion.csv", "model.json", "roc.svg"] {
            assert!(out.join(f).exists(), "{f}");
        }
        let [a, b] = outcome.summary.train_class_counts_after_smote;
        assert_eq!(a, b);
    }

    #[test]
    fn tuning_ranks_candidates() {
        let t = crate::flowdata::FlowTable::new(
            vec!["x".into()],
            (0..60).map(|i| i as f64).collect(),
            (0..60).map(|i| (i >= 30) as u8).collect(),
        )
        .unwrap();
        let r = tune(&t, ModelKind::DecisionTree, 1, 3, None).unwrap();
        assert_eq!(r.len(), 3);
        assert!(r.windows(2).all(|w| w[0].cv.accuracy.mean >= w[1].cv.accuracy.mean));
    }
}
