use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use kldetect_ffi::*;

fn fixture() -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/synthetic_flows.csv");
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = kd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(kd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn train_predict_save_load_round_trip() {
    unsafe {
        let mut table = ptr::null_mut();
        assert_eq!(kd_table_load_csv(fixture().as_ptr(), ptr::null(), &mut table), KdStatus::Ok);
        let n = kd_table_n_rows(table);
        assert_eq!(n, 2000);

        let mut model = ptr::null_mut();
        let scenario = CString::new("fisher_score").unwrap();
        let kind = CString::new("logistic_regression").unwrap();
        assert_eq!(kd_model_train(table, scenario.as_ptr(), kind.as_ptr(), 7, true, &mut model), KdStatus::Ok);
        assert!(kd_model_n_features(model) > 0);

        let mut proba = vec![0.0; n];
        assert_eq!(kd_model_predict_proba(model, table, proba.as_mut_ptr(), n), KdStatus::Ok);
        assert!(proba.iter().all(|p| (0.0..=1.0).contains(p)));

        let mut metrics = std::mem::zeroed::<KdMetrics>();
        assert_eq!(kd_model_evaluate(model, table, &mut metrics), KdStatus::Ok);
        assert!(metrics.accuracy > 0.5 && metrics.auc > 0.5);

        let mut labels = vec![0u8; n];
        assert_eq!(kd_table_labels(table, labels.as_mut_ptr(), n), KdStatus::Ok);
        let mut auc = 0.0;
        assert_eq!(kd_roc_auc(labels.as_ptr(), proba.as_ptr(), n, &mut auc), KdStatus::Ok);
        assert_eq!(auc, metrics.auc);

        let dir = tempfile::tempdir().unwrap();
        for name in ["m.json", "m.bin"] {
            let path = CString::new(dir.path().join(name).to_str().unwrap()).unwrap();
            assert_eq!(kd_model_save(model, path.as_ptr()), KdStatus::Ok);
            let mut back = ptr::null_mut();
            assert_eq!(kd_model_load(path.as_ptr(), &mut back), KdStatus::Ok);
            let mut again = vec![0.0; n];
            assert_eq!(kd_model_predict_proba(back, table, again.as_mut_ptr(), n), KdStatus::Ok);
            assert_eq!(proba, again);
            kd_model_free(back);
        }

        let m = kd_model_n_features(model);
        let mut phi = vec![0.0; m];
        let mut base = 0.0;
        assert_eq!(kd_model_shap(model, table, 5, 20, 1, phi.as_mut_ptr(), m, &mut base), KdStatus::Ok);
        let total = base + phi.iter().sum::<f64>();
        assert!((total - proba[5]).abs() < 1e-6, "{total} vs {}", proba[5]);

        kd_model_free(model);
        kd_table_free(table);
    }
}

#[test]
fn failures_set_status_and_message() {
    unsafe {
        let mut table = ptr::null_mut();
        let missing = CString::new("/nonexistent/flows.csv").unwrap();
        assert_eq!(kd_table_load_csv(missing.as_ptr(), ptr::null(), &mut table), KdStatus::Io);
        assert!(table.is_null());
        assert!(last_error().contains("nonexistent"));

        assert_eq!(kd_table_load_csv(ptr::null(), ptr::null(), &mut table), KdStatus::InvalidArgument);

        let rows = [0.1, 0.2, 0.3, 0.4];
        let labels = [1u8, 1];
        assert_eq!(kd_table_from_rows(rows.as_ptr(), labels.as_ptr(), 2, 2, &mut table), KdStatus::Ok);
        let mut model = ptr::null_mut();
        let all = CString::new("all").unwrap();
        let bogus = CString::new("perceptron").unwrap();
        assert_eq!(kd_model_train(table, all.as_ptr(), bogus.as_ptr(), 1, false, &mut model), KdStatus::InvalidConfig);
        assert!(model.is_null());
        assert!(last_error().contains("perceptron"));

        let mut bad = ptr::null_mut();
        let bad_labels = [0u8, 2];
        assert_eq!(kd_table_from_rows(rows.as_ptr(), bad_labels.as_ptr(), 2, 2, &mut bad), KdStatus::InvalidConfig);
        assert!(bad.is_null());

        let mut small = [0.0; 1];
        assert_eq!(kd_roc_auc(labels.as_ptr(), small.as_mut_ptr(), 1, &mut small[0]), KdStatus::Data);
        kd_table_free(table);
        kd_table_free(ptr::null_mut());
        kd_model_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_public_functions() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/kldetect.h")).unwrap();
    for sym in [
        "kd_version",
        "kd_last_error",
        "kd_table_load_csv",
        "kd_table_from_rows",
        "kd_model_train",
        "kd_model_save",
        "kd_model_load",
        "kd_model_predict_proba",
        "kd_model_evaluate",
        "kd_model_shap",
        "kd_roc_auc",
        "KD_STATUS_OK",
        "KdMetrics",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}
