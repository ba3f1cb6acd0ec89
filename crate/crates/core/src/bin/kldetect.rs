//! `kldetect` command-line interface.
//!
//! Exit codes: 0 success, 1 usage/configuration/I-O failure, 2 data error,
//! 3 convergence warnings under `--strict`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use kldetect::bundle::ModelBundle;
use kldetect::evaluate::{self, EvalReport};
use kldetect::experiment::{self, CvConfig, ExperimentConfig, Scenario};
use kldetect::explain::{self, LimeConfig, ShapConfig};
use kldetect::flowdata::{self, normalize_column_name, LoadOptions};
use kldetect::{fixture, svg, Error, ModelKind};

const EXIT_FAILURE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_STRICT: u8 = 3;

#[derive(Parser)]
#[command(name = "kldetect", version, about = "Keylogger network-flow detection experiments")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one model on one feature scenario.
    Run(RunArgs),
    /// Run every scenario x model cell into per-cell subdirectories.
    Grid(GridArgs),
    /// Rank features only.
    Select(RunArgs),
    /// Explain a saved model with SHAP or LIME.
    Explain(ExplainArgs),
    /// Collect eval_report.json files under a directory into one table.
    Report(ReportArgs),
    /// Cross-validated grid search over a few hyperparameters.
    Tune(RunArgs),
    /// Print (and optionally check) the column-name checksum of a dataset.
    Verify(VerifyArgs),
    /// Write the synthetic flow fixture.
    Fixture(FixtureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args, Clone)]
struct Common {
    /// Dataset CSV.
    #[arg(long, env = "KLDETECT_DATA")]
    data: Option<PathBuf>,
    #[arg(long, default_value = "42")]
    seed: u64,
    #[arg(long, value_enum, default_value = "on")]
    smote: Toggle,
    /// Stratified k-fold cross-validation on the training split (0 = off).
    #[arg(long, default_value = "0")]
    cv: usize,
    /// Output directory (default `out`; overrides the directory of --config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Label column (default: Class, then Label).
    #[arg(long)]
    label_column: Option<String>,
    /// Extra columns to drop, in addition to the identifier columns.
    #[arg(long = "drop")]
    drop: Vec<String>,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
    /// Treat convergence warnings as failures (exit 3).
    #[arg(long)]
    strict: bool,
    /// Resolved config file (e.g. a run's config.json); used verbatim.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "all")]
    scenario: String,
    #[arg(long, default_value = "adaboost")]
    model: String,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated scenarios (default: all four).
    #[arg(long, value_delimiter = ',')]
    scenario: Vec<String>,
    /// Comma-separated models (default: all ten).
    #[arg(long, value_delimiter = ',')]
    model: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Shap,
    Lime,
}

#[derive(Args)]
struct ExplainArgs {
    /// model.json or model.bin written by `run`.
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, env = "KLDETECT_DATA")]
    data: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    /// Row of the dataset to explain.
    #[arg(long, conflicts_with = "global")]
    instance: Option<usize>,
    /// Mean |SHAP| over a sample of rows.
    #[arg(long)]
    global: bool,
    #[arg(long, value_enum, default_value = "shap")]
    method: Method,
    /// Rows sampled for --global.
    #[arg(long, default_value = "100")]
    n_instances: usize,
    #[arg(long, default_value = "100")]
    background: usize,
    #[arg(long, default_value = "2048")]
    samples: usize,
    #[arg(long, default_value = "10")]
    top_k: usize,
    #[arg(long, default_value = "42")]
    seed: u64,
    #[arg(long, default_value = "explain")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory searched recursively for eval_report.json.
    dir: PathBuf,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, env = "KLDETECT_DATA")]
    data: Option<PathBuf>,
    /// Expected hex checksum.
    #[arg(long)]
    expect: Option<String>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = fixture::FIXTURE_ROWS)]
    rows: usize,
    #[arg(long, default_value_t = fixture::FIXTURE_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Lib(Error),
    Usage(String),
    Data(String),
    Strict(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Select(a) => cmd_select(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Report(a) => cmd_report(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Fixture(a) => cmd_fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(if e.is_data_error() { EXIT_DATA } else { EXIT_FAILURE })
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error[cli.usage]: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error[cli.data]: {msg}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Strict(warnings)) => {
            for w in warnings {
                eprintln!("error[cli.non_convergence]: {w}");
            }
            ExitCode::from(EXIT_STRICT)
        }
    }
}

fn require_data(data: Option<PathBuf>) -> CliResult<PathBuf> {
    data.ok_or_else(|| Failure::Usage("no dataset: pass --data or set KLDETECT_DATA".into()))
}

fn build_config(common: &Common, scenario: &str, model: &str) -> CliResult<ExperimentConfig> {
    if let Some(path) = &common.config {
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(out) = &common.out {
            cfg.output_dir = out.clone();
        }
        return Ok(cfg);
    }
    let scenario: Scenario = scenario.parse()?;
    let kind: ModelKind = model.parse()?;
    let mut cfg =
        ExperimentConfig::new(require_data(common.data.clone())?, common.out.clone().unwrap_or_else(|| "out".into()), scenario, kind, common.seed);
    cfg.drop_columns.extend(common.drop.iter().cloned());
    cfg.label_column = common.label_column.clone();
    if matches!(common.smote, Toggle::Off) {
        cfg.smote = None;
    }
    if common.cv > 0 {
        cfg.cv = Some(CvConfig {
            k: common.cv,
            seed: common.seed,
        });
    }
    cfg.svg = common.svg;
    Ok(cfg)
}

fn check_strict(strict: bool, warnings: &[String]) -> CliResult {
    if strict && !warnings.is_empty() {
        return Err(Failure::Strict(warnings.to_vec()));
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

fn print_report(r: &EvalReport) {
    println!(
        "{:<14} {:<20} acc {:.4}  prec {}  rec {}  f1 {}  auc {}",
        r.scenario,
        r.model,
        r.accuracy,
        fmt_opt(r.precision),
        fmt_opt(r.recall),
        fmt_opt(r.f1),
        fmt_opt(r.auc)
    );
}

fn cmd_run(a: RunArgs) -> CliResult {
    let cfg = build_config(&a.common, &a.scenario, &a.model)?;
    let outcome = experiment::run_experiment(&cfg)?;
    print_report(&outcome.report);
    if let Some(cv) = &outcome.report.cv {
        println!(
            "{}-fold CV accuracy {} +/- {}",
            cv.k,
            fmt_opt(cv.accuracy.mean),
            fmt_opt(cv.accuracy.std)
        );
    }
    println!("artifacts: {}", outcome.output_dir.display());
    check_strict(a.common.strict, &outcome.warnings)
}

fn cmd_grid(a: GridArgs) -> CliResult {
    let base = build_config(&a.common, "all", "adaboost")?;
    let scenarios: Vec<Scenario> = if a.scenario.is_empty() {
        Scenario::ALL.to_vec()
    } else {
        a.scenario.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
    };
    let models: Vec<ModelKind> = if a.model.is_empty() {
        ModelKind::ALL.to_vec()
    } else {
        a.model.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
    };
    let cells = experiment::run_grid(&base, &scenarios, &models)?;
    for c in &cells {
        print_report(&c.report);
    }
    println!("summary: {}", base.output_dir.join("grid_summary.csv").display());
    let warnings: Vec<String> = cells
        .iter()
        .flat_map(|c| c.warnings.iter().map(move |w| format!("{}/{}: {w}", c.scenario, c.model)))
        .collect();
    check_strict(a.common.strict, &warnings)
}

fn cmd_select(a: RunArgs) -> CliResult {
    let cfg = build_config(&a.common, &a.scenario, &a.model)?;
    match experiment::run_selection(&cfg)? {
        Some(r) => {
            println!("{} of {} features selected", r.selected.len(), r.scores.len());
            for &j in r.selected.iter().take(50) {
                println!("  {:<40} {:.6}", r.feature_names[j], r.scores[j]);
            }
        }
        None => println!("scenario 'all' keeps every feature"),
    }
    Ok(())
}

fn cmd_tune(a: RunArgs) -> CliResult {
    let cfg = build_config(&a.common, &a.scenario, &a.model)?;
    let loaded = experiment::load(&cfg)?;
    let data = experiment::prepare(&cfg, &loaded)?;
    let k = if a.common.cv > 0 { a.common.cv } else { 5 };
    let results = experiment::tune(&data.train_original, cfg.model.kind(), cfg.seed, k, cfg.smote.as_ref())?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join("tuning.json");
    let json = serde_json::to_string_pretty(&results).map_err(Error::from)? + "\n";
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    for (i, r) in results.iter().enumerate() {
        let cfg_json = serde_json::to_string(&r.config).map_err(Error::from)?;
        println!(
            "#{} acc {} +/- {}  {cfg_json}",
            i + 1,
            fmt_opt(r.cv.accuracy.mean),
            fmt_opt(r.cv.accuracy.std)
        );
    }
    Ok(())
}

fn cmd_explain(a: ExplainArgs) -> CliResult {
    let bundle = ModelBundle::load(&a.bundle)?;
    let data = require_data(a.data)?;
    let opts = LoadOptions {
        label_column: a.label_column,
        ..LoadOptions::default()
    };
    let loaded = flowdata::load_csv_with(&data, &opts)?;
    let table = bundle.prepare(&loaded.table)?;
    let background = explain::sample_background(&table, a.background, a.seed)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let write = |name: &str, contents: String| -> CliResult {
        let p = a.out.join(name);
        fs::write(&p, contents).map_err(|e| Failure::Lib(Error::io(p, e)))
    };
    if a.global {
        if matches!(a.method, Method::Lime) {
            return Err(Failure::Usage("--global is only available with --method shap".into()));
        }
        let sample = explain::sample_background(&table, a.n_instances, a.seed.wrapping_add(1))?;
        let cfg = ShapConfig {
            background_size: a.background,
            n_coalition_samples: a.samples,
            seed: a.seed,
            ..ShapConfig::default()
        };
        let g = explain::shap_global_importance(&bundle.model, &sample, &background, &cfg)?;
        write("shap_global.json", g.to_json()?)?;
        write("shap_global.csv", g.to_csv())?;
        let names: Vec<String> = g.ranked.iter().take(30).map(|&j| g.feature_names[j].clone()).collect();
        let values: Vec<f64> = g.ranked.iter().take(30).map(|&j| g.mean_abs_shap[j]).collect();
        write("shap_global.svg", svg::bar_chart("Mean |SHAP value|", &names, &values))?;
        for &j in g.ranked.iter().take(15) {
            println!("  {:<40} {:.6}", g.feature_names[j], g.mean_abs_shap[j]);
        }
        return Ok(());
    }
    let i = a
        .instance
        .ok_or_else(|| Failure::Usage("pass --instance <row> or --global".into()))?;
    if i >= table.n_rows() {
        return Err(Failure::Data(format!("instance {i} out of range for {} rows", table.n_rows())));
    }
    let x = table.row(i);
    let (attr, stem) = match a.method {
        Method::Shap => {
            let cfg = ShapConfig {
                background_size: a.background,
                n_coalition_samples: a.samples,
                seed: a.seed,
                ..ShapConfig::default()
            };
            (explain::shap_values(&bundle.model, x, &background, &cfg)?, "shap")
        }
        Method::Lime => {
            let cfg = LimeConfig {
                top_k_features: a.top_k,
                seed: a.seed,
                ..LimeConfig::default()
            };
            (explain::lime_explain(&bundle.model, x, Some(&table), &cfg)?, "lime")
        }
    };
    let stem = format!("{stem}_instance_{i}");
    write(&format!("{stem}.json"), attr.to_json()?)?;
    write(&format!("{stem}.csv"), attr.to_csv())?;
    let shown: Vec<usize> = attr.ranked.iter().copied().take(30).collect();
    let names: Vec<String> = shown.iter().map(|&j| attr.feature_names[j].clone()).collect();
    let values: Vec<f64> = shown.iter().map(|&j| attr.feature_contribs[j]).collect();
    let title = format!("Row {i}: p = {:.4}, base = {:.4}", attr.prediction, attr.base_value);
    write(&format!("{stem}.svg"), svg::bar_chart(&title, &names, &values))?;
    println!("prediction {:.6}  base {:.6}  fidelity {:.3e}", attr.prediction, attr.base_value, attr.fidelity);
    for &j in shown.iter().take(15) {
        println!("  {:<40} {:+.6}", attr.feature_names[j], attr.feature_contribs[j]);
    }
    Ok(())
}

fn find_reports(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_reports(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "eval_report.json") {
            out.push(p);
        }
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> CliResult {
    let mut paths = Vec::new();
    find_reports(&a.dir, &mut paths)?;
    if paths.is_empty() {
        return Err(Failure::Usage(format!("no eval_report.json under {}", a.dir.display())));
    }
    let reports: Vec<EvalReport> = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            EvalReport::from_json(&text)
        })
        .collect::<Result<_, _>>()?;
    for r in &reports {
        print_report(r);
    }
    let out = a.dir.join("summary_table.csv");
    fs::write(&out, evaluate::summary_table_csv(&reports)).map_err(|e| Error::io(&out, e))?;
    if a.svg {
        let mut groups: Vec<String> = reports.iter().map(|r| r.model.clone()).collect();
        let mut series: Vec<String> = reports.iter().map(|r| r.scenario.clone()).collect();
        groups.dedup();
        groups.sort();
        groups.dedup();
        series.sort();
        series.dedup();
        let values: Vec<Vec<Option<f64>>> = groups
            .iter()
            .map(|g| {
                series
                    .iter()
                    .map(|s| reports.iter().find(|r| &r.model == g && &r.scenario == s).map(|r| r.accuracy))
                    .collect()
            })
            .collect();
        let p = a.dir.join("summary_accuracy.svg");
        let chart = svg::grouped_bar_chart("Test accuracy", &groups, &series, &values);
        fs::write(&p, chart).map_err(|e| Error::io(&p, e))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// SHA-256 of the normalized header names joined by newlines.
fn header_checksum(path: &Path) -> CliResult<(String, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(Error::from)?;
    let headers = reader.headers().map_err(Error::from)?;
    let names: Vec<String> = headers.iter().map(normalize_column_name).collect();
    if names.iter().all(|n| n.is_empty()) {
        return Err(Failure::Lib(Error::EmptyFile { path: path.into() }));
    }
    let digest = Sha256::digest(names.join("\n").as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok((hex, names.len()))
}

fn cmd_verify(a: VerifyArgs) -> CliResult {
    let path = require_data(a.data)?;
    let (sum, n) = header_checksum(&path)?;
    println!("{sum}  {} ({n} columns)", path.display());
    match a.expect {
        Some(e) if !e.eq_ignore_ascii_case(&sum) => {
            Err(Failure::Data(format!("column checksum mismatch: expected {e}, got {sum}")))
        }
        Some(_) => {
            println!("OK");
            Ok(())
        }
        None => Ok(()),
    }
}

fn cmd_fixture(a: FixtureArgs) -> CliResult {
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&a.out, fixture::synthetic_flows_csv(a.rows, a.seed)).map_err(|e| Error::io(&a.out, e))?;
    println!("wrote {} rows to {}", a.rows, a.out.display());
    Ok(())
}
