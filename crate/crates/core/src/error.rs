use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the detection pipeline.
///
/// Every variant maps to a stable, module-qualified code (see [`Error::code`])
/// that the CLI prints and the C ABI mirrors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: file is empty or has no header row")]
    EmptyFile { path: PathBuf },
    #[error("no label column found (looked for {candidates:?})")]
    MissingLabelColumn { candidates: Vec<String> },
    #[error("malformed row {row}, column {column}: {reason}")]
    MalformedRow {
        row: usize,
        column: usize,
        reason: String,
    },
    #[error("label column holds more than two classes: {classes:?}")]
    TooManyClasses { classes: Vec<String> },
    #[error("table has no rows")]
    EmptyTable,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("insufficient rows: {0}")]
    InsufficientRows(String),
    #[error("minority class has {found} rows, SMOTE needs at least 2")]
    MinorityTooSmall { found: usize },
    #[error("only one class present in the labels")]
    SingleClass,
    #[error("feature index {index} out of range for {n_features} features")]
    IndexOutOfRange { index: usize, n_features: usize },
    #[error("inputs have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("fold too small: {0}")]
    FoldTooSmall(String),
    #[error("holdout partition is degenerate: {0}")]
    DegenerateHoldout(String),
    #[error("voting needs an odd number (at least 3) of members, got {0}")]
    EvenMemberCount(usize),
    #[error("SVM training set has {rows} rows, above the {cap}-row cap; subsample first or enable auto_subsample")]
    TrainingSetTooLarge { rows: usize, cap: usize },
    #[error("perturbation kernel weights sum to zero")]
    DegeneratePerturbations,
    #[error("background sample is empty")]
    EmptyBackground,
    #[error("feature schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("linear system is singular: {0}")]
    Singular(String),
    #[error("corrupt container: {0}")]
    Corrupt(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("binary encoding error: {0}")]
    Binary(#[from] bincode::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Module-qualified identifier, stable across releases.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyFile { .. } => "flowdata.empty_file",
            Error::MissingLabelColumn { .. } => "flowdata.missing_label_column",
            Error::MalformedRow { .. } => "flowdata.malformed_row",
            Error::TooManyClasses { .. } => "flowdata.too_many_classes",
            Error::EmptyTable => "flowdata.empty_table",
            Error::DimensionMismatch { .. } => "flowdata.dimension_mismatch",
            Error::InsufficientRows(_) => "flowdata.insufficient_rows",
            Error::MinorityTooSmall { .. } => "resample.minority_too_small",
            Error::SingleClass => "learners.single_class",
            Error::IndexOutOfRange { .. } => "featsel.index_out_of_range",
            Error::LengthMismatch { .. } => "evaluate.length_mismatch",
            Error::FoldTooSmall(_) => "evaluate.fold_too_small",
            Error::DegenerateHoldout(_) => "ensemble.degenerate_holdout",
            Error::EvenMemberCount(_) => "ensemble.even_member_count",
            Error::TrainingSetTooLarge { .. } => "learners.training_set_too_large",
            Error::DegeneratePerturbations => "explain.degenerate_perturbations",
            Error::EmptyBackground => "explain.empty_background",
            Error::SchemaMismatch(_) => "explain.schema_mismatch",
            Error::InvalidConfig(_) => "cli.invalid_config",
            Error::Singular(_) => "learners.singular",
            Error::Corrupt(_) => "bundle.corrupt",
            Error::Io { .. } => "io",
            Error::Csv(_) => "flowdata.csv",
            Error::Json(_) => "bundle.json",
            Error::Binary(_) => "bundle.binary",
        }
    }

    /// True for errors caused by the input data rather than the environment.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. } | Error::InvalidConfig(_) | Error::Json(_) | Error::Binary(_)
        )
    }
}
