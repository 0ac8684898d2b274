//! C ABI over the generation pipeline: train or load a model, synthesize
//! patched anomalies for single windows, score windows, and compute
//! detection metrics.
//!
//! Conventions:
//! - Every fallible call returns a [`GeniasStatus`]; `GENIAS_STATUS_OK` is 0.
//! - On failure, [`genias_last_error_message`] returns a thread-local,
//!   NUL-terminated description valid until the next failure on the thread.
//! - `GeniasModel` is an opaque handle; release it with [`genias_model_free`].
//! - Window buffers are row-major f64 arrays of shape (window_len, dims) in
//!   the model's raw data space; normalization happens internally using the
//!   stats stored in the checkpoint.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use genias::config::GenConfig;
use genias::data::{apply_normalizer, fit_normalizer, invert_normalizer, load_series, make_windows,
    SeriesFormat, WindowTensor};
use genias::error::GeniasError;
use genias::injector::{deviation_patch, generate_anomaly};
use genias::model::{load_checkpoint, save_checkpoint, ModelParams};
use genias::objectives::mse_distance;
use genias::theory::run_verification;
use genias::trainer::train;
use genias::tsad::{detection_metrics, ScoredWindows};

/// Outcome of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeniasStatus {
    Ok = 0,
    InvalidArgument = 1,
    IoError = 2,
    FormatError = 3,
    ShapeMismatch = 4,
    TrainingFailed = 5,
    MetricError = 6,
    VerificationFailed = 7,
    Panic = 8,
}

/// Opaque trained-model handle.
pub struct GeniasModel {
    inner: ModelParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &GeniasError) -> GeniasStatus {
    match err {
        GeniasError::Parse { .. } | GeniasError::Validation(_) | GeniasError::Checkpoint(_) => {
            GeniasStatus::FormatError
        }
        GeniasError::Shape { .. } => GeniasStatus::ShapeMismatch,
        GeniasError::Param(_) | GeniasError::Config(_) => GeniasStatus::InvalidArgument,
        GeniasError::TrainingAbort { .. } => GeniasStatus::TrainingFailed,
        GeniasError::Metric(_) => GeniasStatus::MetricError,
        GeniasError::Io { .. } => GeniasStatus::IoError,
    }
}

fn fail(err: GeniasError) -> GeniasStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn invalid(message: &str) -> GeniasStatus {
    set_error(message);
    GeniasStatus::InvalidArgument
}

fn guarded(f: impl FnOnce() -> GeniasStatus) -> GeniasStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic across FFI boundary".into());
            set_error(&message);
            GeniasStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string.
unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a str, GeniasStatus> {
    if ptr.is_null() {
        return Err(invalid("null path argument"));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("path is not valid UTF-8");
        GeniasStatus::InvalidArgument
    })
}

/// Message describing the most recent failure on this thread; empty when no
/// failure has occurred. The pointer stays valid until the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn genias_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Load a checkpoint written by `genias_model_save` or the CLI.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn genias_model_load(
    path: *const c_char,
    out: *mut *mut GeniasModel,
) -> GeniasStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("null output handle");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_checkpoint(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(GeniasModel { inner }));
                GeniasStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Persist the model (including its normalization stats).
///
/// # Safety
/// `model` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn genias_model_save(
    model: *const GeniasModel,
    path: *const c_char,
) -> GeniasStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return invalid("null model handle");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match save_checkpoint(&model.inner, Path::new(path)) {
            Ok(()) => GeniasStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Release a model handle. Passing NULL is a no-op.
///
/// # Safety
/// `model` must be NULL or a handle obtained from this library, and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn genias_model_free(model: *mut GeniasModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Window length, input dimensions, and latent size of the model.
///
/// # Safety
/// All pointers must be valid; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn genias_model_dims(
    model: *const GeniasModel,
    window_len: *mut u32,
    dims: *mut u32,
    latent: *mut u32,
) -> GeniasStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return invalid("null model handle");
        };
        if window_len.is_null() || dims.is_null() || latent.is_null() {
            return invalid("null output pointer");
        }
        *window_len = model.inner.window_len as u32;
        *dims = model.inner.dims as u32;
        *latent = model.inner.latent as u32;
        GeniasStatus::Ok
    })
}

/// Mean constrained perturbation scale (always above 1).
///
/// # Safety
/// `model` must be a live handle; `psi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn genias_model_psi(
    model: *const GeniasModel,
    psi: *mut f64,
) -> GeniasStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return invalid("null model handle");
        };
        if psi.is_null() {
            return invalid("null output pointer");
        }
        *psi = model.inner.perturbation().report_value();
        GeniasStatus::Ok
    })
}

/// Train a model on a CSV series (header `dim_0,...`), slicing
/// non-overlapping windows and fitting min-max normalization on them.
/// `config_toml` may be NULL for defaults sized to the data, or a TOML
/// document with the training hyperparameters.
///
/// # Safety
/// `train_csv` must be NUL-terminated; `config_toml` NULL or NUL-terminated;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn genias_train_csv(
    train_csv: *const c_char,
    config_toml: *const c_char,
    seed: u64,
    out: *mut *mut GeniasModel,
) -> GeniasStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("null output handle");
        }
        let path = match path_arg(train_csv) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let series = match load_series(Path::new(path), SeriesFormat::Csv) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let config: GenConfig = if config_toml.is_null() {
            let mut c = GenConfig::for_dims(series.dims());
            c.window_len = series.len().min(200);
            c
        } else {
            let text = match path_arg(config_toml) {
                Ok(t) => t,
                Err(s) => return s,
            };
            match toml::from_str(text) {
                Ok(c) => c,
                Err(e) => {
                    set_error(&format!("config: {e}"));
                    return GeniasStatus::InvalidArgument;
                }
            }
        };
        if config.dims != series.dims() {
            set_error(&format!(
                "config dims {} does not match data dims {}",
                config.dims,
                series.dims()
            ));
            return GeniasStatus::ShapeMismatch;
        }
        let run = || -> Result<ModelParams, GeniasError> {
            let windows = make_windows(&series, config.window_len, config.window_len)?;
            let stats = fit_normalizer(&windows)?;
            let normalized = apply_normalizer(&windows, &stats)?;
            let mut result = train(&normalized, &config, seed)?;
            result.model.norm = Some(stats);
            Ok(result.model)
        };
        match run() {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(GeniasModel { inner }));
                GeniasStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

unsafe fn window_arg<'a>(
    model: &ModelParams,
    data: *const f64,
    len: usize,
) -> Result<ArrayView2<'a, f64>, GeniasStatus> {
    if data.is_null() {
        return Err(invalid("null window buffer"));
    }
    let expected = model.window_len * model.dims;
    if len != expected {
        set_error(&format!(
            "window buffer holds {len} values, model expects {expected}"
        ));
        return Err(GeniasStatus::ShapeMismatch);
    }
    let slice = std::slice::from_raw_parts(data, len);
    ArrayView2::from_shape((model.window_len, model.dims), slice).map_err(|e| {
        set_error(&e.to_string());
        GeniasStatus::ShapeMismatch
    })
}

fn normalize_one(model: &ModelParams, window: &ArrayView2<f64>) -> Result<WindowTensor, GeniasError> {
    let stats = model.norm.as_ref().ok_or_else(|| {
        GeniasError::Checkpoint("model carries no normalization stats".into())
    })?;
    let w = WindowTensor::new(window.to_owned(), ("ffi".into(), 0), None)?;
    Ok(apply_normalizer(&[w], stats)?.remove(0))
}

/// Generate a perturbed window and compose it with the source by
/// deviation patching at threshold `tau`. The input is raw-space; the
/// patched output is mapped back to raw space. `out_mask` (length
/// window_len*dims) may be NULL if the mask is not needed.
///
/// # Safety
/// Buffers must hold `window_len * dims` elements; `model` must be live.
#[no_mangle]
pub unsafe extern "C" fn genias_generate_patched(
    model: *const GeniasModel,
    window: *const f64,
    len: usize,
    tau: f64,
    seed: u64,
    out_window: *mut f64,
    out_mask: *mut u8,
) -> GeniasStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return invalid("null model handle");
        };
        if out_window.is_null() {
            return invalid("null output buffer");
        }
        let view = match window_arg(&model.inner, window, len) {
            Ok(v) => v,
            Err(s) => return s,
        };
        let run = || -> Result<(Array2<f64>, Array2<u8>), GeniasError> {
            let normalized = normalize_one(&model.inner, &view)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xtilde = generate_anomaly(&model.inner, &normalized.data.view(), &mut rng)?;
            let patched = deviation_patch(&normalized.data.view(), &xtilde.view(), tau)?;
            let stats = model.inner.norm.as_ref().expect("checked in normalize_one");
            let raw = invert_normalizer(&[patched.data], stats)?.remove(0);
            Ok((raw.data, patched.mask))
        };
        match run() {
            Ok((data, mask)) => {
                let out = std::slice::from_raw_parts_mut(out_window, len);
                for (slot, v) in out.iter_mut().zip(data.iter()) {
                    *slot = *v;
                }
                if !out_mask.is_null() {
                    let out = std::slice::from_raw_parts_mut(out_mask, len);
                    for (slot, m) in out.iter_mut().zip(mask.iter()) {
                        *slot = *m;
                    }
                }
                GeniasStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Anomaly score of a raw-space window: reconstruction MSE through the
/// posterior mean in normalized space. Deterministic.
///
/// # Safety
/// `window` must hold `window_len * dims` values; `score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn genias_recon_score(
    model: *const GeniasModel,
    window: *const f64,
    len: usize,
    score: *mut f64,
) -> GeniasStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return invalid("null model handle");
        };
        if score.is_null() {
            return invalid("null output pointer");
        }
        let view = match window_arg(&model.inner, window, len) {
            Ok(v) => v,
            Err(s) => return s,
        };
        let run = || -> Result<f64, GeniasError> {
            let normalized = normalize_one(&model.inner, &view)?;
            let lat = model.inner.encode(&normalized.data.view())?;
            let rec = model.inner.decode(&lat.mu.view())?;
            mse_distance(&normalized.data.view(), &rec.view())
        };
        match run() {
            Ok(s) => {
                *score = s;
                GeniasStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Threshold-based detection metrics over scored windows. `labels` holds
/// 0/1 per window and must contain both classes.
///
/// # Safety
/// `scores` and `labels` must hold `n` elements; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn genias_detection_metrics(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    best_f1: *mut f64,
    best_threshold: *mut f64,
    aupr: *mut f64,
    auroc: *mut f64,
) -> GeniasStatus {
    guarded(|| {
        if scores.is_null() || labels.is_null() {
            return invalid("null input buffer");
        }
        if best_f1.is_null() || best_threshold.is_null() || aupr.is_null() || auroc.is_null() {
            return invalid("null output pointer");
        }
        let scores = std::slice::from_raw_parts(scores, n).to_vec();
        let labels = std::slice::from_raw_parts(labels, n).to_vec();
        let run = || -> Result<genias::tsad::DetectionMetrics, GeniasError> {
            detection_metrics(&ScoredWindows::new(scores, labels)?)
        };
        match run() {
            Ok(m) => {
                *best_f1 = m.best_f1;
                *best_threshold = m.best_threshold;
                *aupr = m.aupr;
                *auroc = m.auroc;
                GeniasStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Run the self-contained verification grid; returns Ok only when every
/// check holds. `checks_run` may be NULL.
///
/// # Safety
/// `checks_run` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn genias_verify(seed: u64, checks_run: *mut u32) -> GeniasStatus {
    guarded(|| match run_verification(seed) {
        Ok(report) => {
            if !checks_run.is_null() {
                *checks_run = report.checks.len() as u32;
            }
            if report.all_hold {
                GeniasStatus::Ok
            } else {
                set_error(&format!(
                    "{} verification check(s) failed",
                    report.failures().len()
                ));
                GeniasStatus::VerificationFailed
            }
        }
        Err(e) => fail(e),
    })
}
