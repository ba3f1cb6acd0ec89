//! C ABI over the `kldetect` library.
//!
//! Tables and models are opaque heap handles released with their `_free`
//! function. Every fallible call returns a [`KdStatus`]; on failure the
//! message is available from [`kd_last_error`] on the same thread until the
//! next failing call. Panics are caught at the boundary and reported as
//! [`KdStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use kldetect::bundle::ModelBundle;
use kldetect::evaluate;
use kldetect::experiment::{self, Scenario, SelectionConfig};
use kldetect::explain::{self, ShapConfig};
use kldetect::flowdata::{self, FlowTable, LoadOptions};
use kldetect::resample::{self, SmoteConfig};
use kldetect::{Error, ModelConfig, ModelKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdStatus {
    Ok = 0,
    /// A null pointer, bad UTF-8, unknown name or undersized buffer.
    InvalidArgument = 1,
    Io = 2,
    /// Malformed, inconsistent or unusable data.
    Data = 3,
    InvalidConfig = 4,
    /// A bundle that could not be encoded or decoded.
    Encoding = 5,
    Panic = 6,
}

/// A loaded table of flows with binary labels.
pub struct KdTable(FlowTable);

/// A trained model together with its scaler and feature selection.
pub struct KdModel(ModelBundle);

/// Held-out metrics. Undefined ratios are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub auc: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(KdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => KdStatus::Io,
            Error::InvalidConfig(_) => KdStatus::InvalidConfig,
            Error::Json(_) | Error::Binary(_) => KdStatus::Encoding,
            _ => KdStatus::Data,
        };
        Fail(status, format!("{}: {e}", e.code()))
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(KdStatus::InvalidArgument, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> KdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            KdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| invalid(format!("{what} is null")))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    if len < need {
        return Err(invalid(format!("{what} holds {len} values, {need} needed")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn kd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a flow CSV, dropping the identifier columns. `label_column` may be
/// null to use the default candidates.
///
/// # Safety
/// `path` and a non-null `label_column` must be NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn kd_table_load_csv(
    path: *const c_char,
    label_column: *const c_char,
    out: *mut *mut KdTable,
) -> KdStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let opts = LoadOptions {
            label_column: opt_str_arg(label_column, "label_column")?.map(str::to_owned),
            ..LoadOptions::default()
        };
        let loaded = flowdata::load_csv_with(&path, &opts)?;
        put(out, KdTable(loaded.table))
    })
}

/// Builds a table from a row-major `n_rows * n_features` matrix and 0/1
/// labels. Features are named `f0`, `f1`, ...
///
/// # Safety
/// `features` must hold `n_rows * n_features` values and `labels` `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn kd_table_from_rows(
    features: *const f64,
    labels: *const u8,
    n_rows: usize,
    n_features: usize,
    out: *mut *mut KdTable,
) -> KdStatus {
    guard(|| {
        if features.is_null() || labels.is_null() {
            return Err(invalid("features or labels is null"));
        }
        let len = n_rows.checked_mul(n_features).ok_or_else(|| invalid("table size overflows"))?;
        let data = std::slice::from_raw_parts(features, len).to_vec();
        let labels = std::slice::from_raw_parts(labels, n_rows).to_vec();
        let names = (0..n_features).map(|j| format!("f{j}")).collect();
        put(out, KdTable(FlowTable::new(names, data, labels)?))
    })
}

/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kd_table_n_rows(table: *const KdTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.n_rows())
}

/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kd_table_n_features(table: *const KdTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.n_features())
}

/// Copies the 0/1 labels into `out`.
///
/// # Safety
/// `out` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn kd_table_labels(table: *const KdTable, out: *mut u8, len: usize) -> KdStatus {
    guard(|| {
        let t = &handle(table, "table")?.0;
        if out.is_null() || len < t.n_rows() {
            return Err(invalid(format!("label buffer needs {} bytes", t.n_rows())));
        }
        std::slice::from_raw_parts_mut(out, t.n_rows()).copy_from_slice(t.labels());
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kd_table_free(table: *mut KdTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Fits a MinMax scaler on `table`, optionally balances it with SMOTE,
/// applies the named feature-selection scenario (`all`, `info_gain`,
/// `lasso_l1`, `fisher_score`) and trains the named model with its defaults.
///
/// # Safety
/// `table` must be a live handle, `scenario` and `model` NUL-terminated
/// strings, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kd_model_train(
    table: *const KdTable,
    scenario: *const c_char,
    model: *const c_char,
    seed: u64,
    smote: bool,
    out: *mut *mut KdModel,
) -> KdStatus {
    guard(|| {
        let t = &handle(table, "table")?.0;
        let scenario: Scenario = str_arg(scenario, "scenario")?.parse()?;
        let kind: ModelKind = str_arg(model, "model")?.parse()?;
        let scaler = flowdata::fit_minmax(t)?;
        let mut train = flowdata::apply_minmax(t, &scaler)?;
        if smote {
            train = resample::smote(&train, &SmoteConfig {
                seed,
                ..SmoteConfig::default()
            })?;
        }
        let mut warnings = Vec::new();
        let ranking = experiment::select_features(&train, scenario, &SelectionConfig::with_seed(seed), &mut warnings)?;
        let selected: Vec<usize> = match &ranking {
            Some(r) => r.selected.clone(),
            None => (0..train.n_features()).collect(),
        };
        let train = train.select_columns(&selected)?;
        let fitted = ModelConfig::default_for(kind, seed).fit(&train)?;
        put(out, KdModel(ModelBundle::new(t.feature_names().to_vec(), scaler, selected, fitted)))
    })
}

/// Writes the model as `model.json` style JSON, or the compact binary form
/// when `path` ends in `.bin`.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn kd_model_save(model: *const KdModel, path: *const c_char) -> KdStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        Ok(m.save(&PathBuf::from(str_arg(path, "path")?))?)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kd_model_load(path: *const c_char, out: *mut *mut KdModel) -> KdStatus {
    guard(|| {
        let bundle = ModelBundle::load(&PathBuf::from(str_arg(path, "path")?))?;
        put(out, KdModel(bundle))
    })
}

/// Number of features the model consumes after selection.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kd_model_n_features(model: *const KdModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.selected.len())
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kd_model_free(model: *mut KdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Class-1 probabilities for every row of a raw (unscaled) table.
///
/// # Safety
/// Handles must be live and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn kd_model_predict_proba(
    model: *const KdModel,
    table: *const KdTable,
    out: *mut f64,
    len: usize,
) -> KdStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let t = &handle(table, "table")?.0;
        let dst = out_slice(out, len, t.n_rows(), "out")?;
        dst.copy_from_slice(&m.predict_proba_raw(t)?);
        Ok(())
    })
}

/// Metrics of the model on `table`, predictions at the 0.5 threshold.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kd_model_evaluate(
    model: *const KdModel,
    table: *const KdTable,
    out: *mut KdMetrics,
) -> KdStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let t = &handle(table, "table")?.0;
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let prepared = m.prepare(t)?;
        let r = evaluate::EvalReport::evaluate(&m.model, &prepared, m.kind.name(), "ffi")?;
        *out = KdMetrics {
            accuracy: r.accuracy,
            precision: r.precision.unwrap_or(f64::NAN),
            recall: r.recall.unwrap_or(f64::NAN),
            specificity: r.specificity.unwrap_or(f64::NAN),
            f1: r.f1.unwrap_or(f64::NAN),
            auc: r.auc.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Area under the ROC curve of `scores` against 0/1 `labels`.
///
/// # Safety
/// `labels` and `scores` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kd_roc_auc(labels: *const u8, scores: *const f64, n: usize, out: *mut f64) -> KdStatus {
    guard(|| {
        if labels.is_null() || scores.is_null() || out.is_null() {
            return Err(invalid("null argument"));
        }
        let labels = std::slice::from_raw_parts(labels, n);
        let scores = std::slice::from_raw_parts(scores, n);
        *out = evaluate::roc_auc(labels, scores)?.1;
        Ok(())
    })
}

/// SHAP values of row `row` of a raw table, against a background of up to
/// `background_size` rows of the same table. Writes one value per model
/// feature into `out` and the background expectation into `base_value`.
///
/// # Safety
/// Handles must be live, `out` must hold `len` doubles and `base_value` be
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn kd_model_shap(
    model: *const KdModel,
    table: *const KdTable,
    row: usize,
    background_size: usize,
    seed: u64,
    out: *mut f64,
    len: usize,
    base_value: *mut f64,
) -> KdStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let t = &handle(table, "table")?.0;
        if row >= t.n_rows() {
            return Err(invalid(format!("row {row} out of range for {} rows", t.n_rows())));
        }
        let prepared = m.prepare(t)?;
        let dst = out_slice(out, len, prepared.n_features(), "out")?;
        let background = explain::sample_background(&prepared, background_size, seed)?;
        let cfg = ShapConfig {
            background_size,
            seed,
            ..ShapConfig::default()
        };
        let attr = explain::shap_values(&m.model, prepared.row(row), &background, &cfg)?;
        dst.copy_from_slice(&attr.feature_contribs);
        if !base_value.is_null() {
            *base_value = attr.base_value;
        }
        Ok(())
    })
}

