//! Exercises the C ABI exactly as a foreign caller would: raw pointers,
//! status codes, and the thread-local error message.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use genias_ffi::{
    genias_detection_metrics, genias_generate_patched, genias_last_error_message,
    genias_model_dims, genias_model_free, genias_model_load, genias_model_psi, genias_model_save,
    genias_recon_score, genias_train_csv, genias_verify, GeniasModel, GeniasStatus,
};

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(genias_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

fn train_tiny() -> *mut GeniasModel {
    let train_csv = c_path(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpora/sine_train.csv"),
    );
    let config = CString::new(
        r#"
window_len = 64
dims = 1
latent = 8
batch_size = 50
learning_rate = 1e-3
max_epochs = 20
patience = 100

[arch]
channels = [8, 12]
dilations = [1, 2]
kernel_size = 3
dropout = 0.1
"#,
    )
    .unwrap();
    let mut model: *mut GeniasModel = ptr::null_mut();
    let status =
        unsafe { genias_train_csv(train_csv.as_ptr(), config.as_ptr(), 3, &mut model) };
    assert_eq!(status, GeniasStatus::Ok, "train failed: {}", last_error());
    assert!(!model.is_null());
    model
}

#[test]
fn train_query_generate_score_roundtrip() {
    let model = train_tiny();

    let (mut t, mut d, mut l) = (0u32, 0u32, 0u32);
    let status = unsafe { genias_model_dims(model, &mut t, &mut d, &mut l) };
    assert_eq!(status, GeniasStatus::Ok);
    assert_eq!((t, d, l), (64, 1, 8));

    let mut psi = 0.0;
    assert_eq!(unsafe { genias_model_psi(model, &mut psi) }, GeniasStatus::Ok);
    assert!(psi > 1.0);

    // A raw-space window shaped like the corpus.
    let window: Vec<f64> = (0..64)
        .map(|i| 0.5 + 0.3 * (i as f64 * 0.4).sin())
        .collect();
    let mut patched = vec![0.0f64; 64];
    let mut mask = vec![0u8; 64];
    let status = unsafe {
        genias_generate_patched(
            model,
            window.as_ptr(),
            window.len(),
            0.2,
            11,
            patched.as_mut_ptr(),
            mask.as_mut_ptr(),
        )
    };
    assert_eq!(status, GeniasStatus::Ok, "{}", last_error());
    // Patched cells differ from the source, untouched cells agree exactly.
    assert!(mask.iter().any(|&m| m == 1));
    for ((orig, out), m) in window.iter().zip(&patched).zip(&mask) {
        if *m == 0 {
            assert!((orig - out).abs() < 1e-9);
        }
    }
    // Deterministic for a fixed seed.
    let mut patched2 = vec![0.0f64; 64];
    let status = unsafe {
        genias_generate_patched(
            model,
            window.as_ptr(),
            window.len(),
            0.2,
            11,
            patched2.as_mut_ptr(),
            ptr::null_mut(),
        )
    };
    assert_eq!(status, GeniasStatus::Ok);
    assert_eq!(patched, patched2);

    let mut score = -1.0;
    let status =
        unsafe { genias_recon_score(model, window.as_ptr(), window.len(), &mut score) };
    assert_eq!(status, GeniasStatus::Ok);
    assert!(score >= 0.0);

    // Save and reload through the ABI; scores must agree bitwise.
    let dir = tempfile::tempdir().unwrap();
    let ckpt = c_path(&dir.path().join("m.gvae"));
    assert_eq!(unsafe { genias_model_save(model, ckpt.as_ptr()) }, GeniasStatus::Ok);
    let mut reloaded: *mut GeniasModel = ptr::null_mut();
    assert_eq!(
        unsafe { genias_model_load(ckpt.as_ptr(), &mut reloaded) },
        GeniasStatus::Ok
    );
    let mut score2 = -1.0;
    assert_eq!(
        unsafe { genias_recon_score(reloaded, window.as_ptr(), window.len(), &mut score2) },
        GeniasStatus::Ok
    );
    assert_eq!(score, score2);

    unsafe {
        genias_model_free(model);
        genias_model_free(reloaded);
    }
}

#[test]
fn error_paths_set_messages() {
    // Null arguments.
    let mut out: *mut GeniasModel = ptr::null_mut();
    assert_eq!(
        unsafe { genias_model_load(ptr::null(), &mut out) },
        GeniasStatus::InvalidArgument
    );
    assert!(!last_error().is_empty());

    // Missing checkpoint file.
    let missing = CString::new("/nonexistent/model.gvae").unwrap();
    assert_eq!(
        unsafe { genias_model_load(missing.as_ptr(), &mut out) },
        GeniasStatus::IoError
    );
    assert!(last_error().contains("nonexistent"));

    // Wrong window length.
    let model = train_tiny();
    let short = vec![0.5f64; 10];
    let mut score = 0.0;
    assert_eq!(
        unsafe { genias_recon_score(model, short.as_ptr(), short.len(), &mut score) },
        GeniasStatus::ShapeMismatch
    );
    assert!(last_error().contains("expects"));
    unsafe { genias_model_free(model) };

    // Single-class labels.
    let scores = [0.1, 0.9];
    let labels = [1u8, 1u8];
    let (mut f1, mut th, mut pr, mut roc) = (0.0, 0.0, 0.0, 0.0);
    assert_eq!(
        unsafe {
            genias_detection_metrics(
                scores.as_ptr(),
                labels.as_ptr(),
                2,
                &mut f1,
                &mut th,
                &mut pr,
                &mut roc,
            )
        },
        GeniasStatus::MetricError
    );
}

#[test]
fn detection_metrics_hand_value() {
    let scores = [0.9, 0.8, 0.2, 0.1];
    let labels = [1u8, 0, 1, 0];
    let (mut f1, mut th, mut pr, mut roc) = (0.0, 0.0, 0.0, 0.0);
    let status = unsafe {
        genias_detection_metrics(
            scores.as_ptr(),
            labels.as_ptr(),
            4,
            &mut f1,
            &mut th,
            &mut pr,
            &mut roc,
        )
    };
    assert_eq!(status, GeniasStatus::Ok);
    assert!((roc - 0.75).abs() < 1e-12);
    assert!(f1 > 0.0 && th.is_finite() && pr > 0.0);
}

#[test]
fn verify_through_the_abi() {
    let mut checks = 0u32;
    assert_eq!(unsafe { genias_verify(1234, &mut checks) }, GeniasStatus::Ok);
    assert!(checks >= 20);
}

#[test]
fn generated_header_exposes_the_surface() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/genias.h");
    let header = std::fs::read_to_string(&header_path).expect("cbindgen header exists");
    for symbol in [
        "GeniasStatus",
        "GENIAS_STATUS_OK",
        "GENIAS_STATUS_SHAPE_MISMATCH",
        "GeniasModel",
        "genias_model_load",
        "genias_model_save",
        "genias_model_free",
        "genias_model_dims",
        "genias_train_csv",
        "genias_generate_patched",
        "genias_recon_score",
        "genias_detection_metrics",
        "genias_verify",
        "genias_last_error_message",
    ] {
        assert!(header.contains(symbol), "header missing {symbol}");
    }

    // The header must stand alone as C.
    let syntax_check = std::process::Command::new("gcc")
        .args(["-fsyntax-only", "-x", "c"])
        .arg(&header_path)
        .output();
    if let Ok(out) = syntax_check {
        assert!(
            out.status.success(),
            "header fails C syntax check: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
