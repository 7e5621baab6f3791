use std::ffi::{CStr, CString};
use std::ptr;

use ihm_ffi::*;

fn last_error() -> String {
    let p = ihm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const FAST: &str =
    "tune_lambda = false\n[train]\nmax_epochs = 2\nhidden = 4\n[featurize.embedding]\ndim = 16\n";

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(ihm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn metrics_match_core() {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0u8, 0, 1, 1];
    let mut out = 0.0;
    unsafe {
        assert_eq!(
            ihm_auroc(scores.as_ptr(), labels.as_ptr(), 4, &mut out),
            IhmStatus::Ok
        );
        assert_eq!(out, 0.75);
        assert_eq!(
            ihm_auprc(scores.as_ptr(), labels.as_ptr(), 4, &mut out),
            IhmStatus::Ok
        );
        assert!((out - 0.8333333333333333).abs() < 1e-12);
        assert_eq!(ihm_improvement(0.8955, 0.8320, &mut out), IhmStatus::Ok);
        assert_eq!(format!("{out:.2}"), "7.63");
    }
}

#[test]
fn single_class_and_null_inputs_report_errors() {
    let scores = [0.1, 0.4];
    let labels = [1u8, 1];
    let mut out = 0.0;
    unsafe {
        assert_eq!(
            ihm_auroc(scores.as_ptr(), labels.as_ptr(), 2, &mut out),
            IhmStatus::DataError
        );
        assert!(!last_error().is_empty());
        assert_eq!(
            ihm_auroc(ptr::null(), labels.as_ptr(), 2, &mut out),
            IhmStatus::InvalidArgument
        );
        assert!(last_error().contains("scores"));
        assert_eq!(
            ihm_auroc(scores.as_ptr(), labels.as_ptr(), 2, ptr::null_mut()),
            IhmStatus::InvalidArgument
        );
        assert_eq!(
            ihm_improvement(0.5, 0.0, &mut out),
            IhmStatus::InvalidArgument
        );
    }
}

#[test]
fn decay_weight_validates_instead_of_panicking() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(ihm_decay_weight(10.0, 0.0, 0.1, &mut out), IhmStatus::Ok);
        assert!((out - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(
            ihm_decay_weight(1.0, 2.0, 0.1, &mut out),
            IhmStatus::InvalidArgument
        );
        assert_eq!(
            ihm_decay_weight(2.0, 1.0, -0.1, &mut out),
            IhmStatus::InvalidArgument
        );
    }
}

#[test]
fn embed_text_is_unit_norm_and_checks_dim() {
    let text = CString::new("septic shock noted").unwrap();
    let mut v = vec![0.0; 32];
    unsafe {
        assert_eq!(
            ihm_embed_text(text.as_ptr(), 32, v.as_mut_ptr()),
            IhmStatus::Ok
        );
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_eq!(
            ihm_embed_text(text.as_ptr(), 4, v.as_mut_ptr()),
            IhmStatus::InvalidArgument
        );
    }
}

#[test]
fn cohort_handles() {
    let mut cohort: *mut IhmCohort = ptr::null_mut();
    unsafe {
        assert_eq!(
            ihm_cohort_generate(0, 1, &mut cohort),
            IhmStatus::ConfigError
        );
        assert!(cohort.is_null());
        assert_eq!(ihm_cohort_generate(50, 1, &mut cohort), IhmStatus::Ok);
        assert_eq!(ihm_cohort_len(cohort), 50);
        let p = ihm_cohort_prevalence(cohort);
        assert!(p > 0.0 && p < 1.0);
        ihm_cohort_free(cohort);
        ihm_cohort_free(ptr::null_mut());
        assert_eq!(ihm_cohort_len(ptr::null()), 0);

        let missing = CString::new("/nonexistent/cohort.jsonl").unwrap();
        assert_eq!(
            ihm_cohort_load(missing.as_ptr(), true, &mut cohort),
            IhmStatus::IoError
        );
        assert!(last_error().contains("nonexistent"));
    }
}

#[test]
fn train_save_load_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
    let variant = CString::new("ts_notes_expert").unwrap();
    let config = CString::new(FAST).unwrap();
    let mut cohort: *mut IhmCohort = ptr::null_mut();
    let mut model: *mut IhmModel = ptr::null_mut();
    let mut loaded: *mut IhmModel = ptr::null_mut();
    unsafe {
        assert_eq!(ihm_cohort_generate(120, 3, &mut cohort), IhmStatus::Ok);
        assert_eq!(
            ihm_model_train(cohort, variant.as_ptr(), config.as_ptr(), &mut model),
            IhmStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(ihm_model_save(model, path.as_ptr()), IhmStatus::Ok);
        assert_eq!(ihm_model_load(path.as_ptr(), &mut loaded), IhmStatus::Ok);

        let mut written = 0usize;
        assert_eq!(
            ihm_model_predict(
                model,
                cohort,
                IhmSplit::Test,
                ptr::null_mut(),
                0,
                &mut written
            ),
            IhmStatus::InvalidArgument
        );
        assert!(written > 0);
        let mut a = vec![0.0; written];
        let mut b = vec![0.0; written];
        assert_eq!(
            ihm_model_predict(
                model,
                cohort,
                IhmSplit::Test,
                a.as_mut_ptr(),
                a.len(),
                &mut written
            ),
            IhmStatus::Ok
        );
        assert_eq!(
            ihm_model_predict(
                loaded,
                cohort,
                IhmSplit::Test,
                b.as_mut_ptr(),
                b.len(),
                &mut written
            ),
            IhmStatus::Ok
        );
        assert_eq!(a, b);
        assert!(a.iter().all(|p| *p > 0.0 && *p < 1.0));

        ihm_model_free(model);
        ihm_model_free(loaded);
        ihm_cohort_free(cohort);
    }
}

#[test]
fn bad_variant_and_config_are_config_errors() {
    let mut cohort: *mut IhmCohort = ptr::null_mut();
    let mut model: *mut IhmModel = ptr::null_mut();
    let bad_variant = CString::new("transformer").unwrap();
    let good_variant = CString::new("ts_only").unwrap();
    let bad_config = CString::new("unknown_key = 1").unwrap();
    unsafe {
        assert_eq!(ihm_cohort_generate(30, 1, &mut cohort), IhmStatus::Ok);
        assert_eq!(
            ihm_model_train(cohort, bad_variant.as_ptr(), ptr::null(), &mut model),
            IhmStatus::ConfigError
        );
        assert_eq!(
            ihm_model_train(
                cohort,
                good_variant.as_ptr(),
                bad_config.as_ptr(),
                &mut model
            ),
            IhmStatus::ConfigError
        );
        assert!(model.is_null());
        assert_eq!(
            ihm_model_train(ptr::null(), good_variant.as_ptr(), ptr::null(), &mut model),
            IhmStatus::InvalidArgument
        );
        ihm_cohort_free(cohort);
    }
}

#[test]
fn errors_are_thread_local() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(
            ihm_improvement(0.5, -1.0, &mut out),
            IhmStatus::InvalidArgument
        );
    }
    let other = std::thread::spawn(|| ihm_last_error().is_null())
        .join()
        .unwrap();
    assert!(other);
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ihm.h")).unwrap();
    for name in [
        "ihm_version",
        "ihm_last_error",
        "ihm_cohort_load",
        "ihm_cohort_generate",
        "ihm_cohort_len",
        "ihm_cohort_prevalence",
        "ihm_cohort_free",
        "ihm_model_train",
        "ihm_model_load",
        "ihm_model_save",
        "ihm_model_predict",
        "ihm_model_free",
        "ihm_auroc",
        "ihm_auprc",
        "ihm_improvement",
        "ihm_decay_weight",
        "ihm_embed_text",
        "IHM_STATUS_PANIC = 6",
        "typedef struct IhmCohort IhmCohort",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ihm.h"))
        .status()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(status.success());
}
