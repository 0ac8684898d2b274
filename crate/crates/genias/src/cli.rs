//! Command implementations behind the `genias` binary: config-driven
//! train / inject / evaluate / verify / plot / sweep pipelines with
//! file-based artifacts and stable exit codes.
//!
//! Exit codes: 2 config error, 3 data error, 4 training abort, 5
//! checkpoint/data mismatch, 6 missing artifacts or labels, 7 failed
//! verification checks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{GenConfig, PatchConfig, PatchMode};
use crate::data::{
    apply_normalizer, fit_normalizer, load_series, make_windows, NormStats, RawSeries,
    SeriesFormat, WindowTensor,
};
use crate::error::GeniasError;
use crate::genquality::{arp, build_partition, default_k, edi, train_embedder, GenQualityReport};
use crate::injector::{batch_inject, load_injected, save_injected, InjectionManifest};
use crate::model::{file_sha256, load_checkpoint, save_checkpoint, ModelParams};
use crate::plot::{overlay_svg, score_histogram_svg};
use crate::theory::run_verification;
use crate::trainer::train_with_observer;
use crate::tsad::{
    detection_metrics, recon_score, train_classifier_detector, DetectionReport, ScoredWindows,
};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;
pub const EXIT_CHECKPOINT: i32 = 5;
pub const EXIT_ARTIFACTS: i32 = 6;
pub const EXIT_VERIFY: i32 = 7;

/// Terminal failure carrying the process exit code.
#[derive(Debug)]
pub struct CliFailure {
    pub code: i32,
    pub message: String,
}

impl CliFailure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliFailure {
            code,
            message: message.into(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliFailure>;

fn fail(code: i32) -> impl Fn(GeniasError) -> CliFailure {
    move |e| CliFailure::new(code, e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    #[default]
    Csv,
    Binary,
}

impl From<FileFormat> for SeriesFormat {
    fn from(f: FileFormat) -> Self {
        match f {
            FileFormat::Csv => SeriesFormat::Csv,
            FileFormat::Binary => SeriesFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train: Option<String>,
    pub test: Option<String>,
    pub format: FileFormat,
    /// Windowing stride for training data; defaults to the window length.
    pub train_stride: Option<usize>,
    /// Windowing stride for evaluation data; defaults to 1.
    pub eval_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Region count for the diversity index; auto-sized when absent.
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotConfig {
    pub bins: usize,
    pub log_y: bool,
    pub max_overlays: usize,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig {
            bins: 40,
            log_y: true,
            max_overlays: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub sigma_prior: Vec<f64>,
    pub tau: Vec<f64>,
}

/// Full declarative run description; flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub deterministic: bool,
    pub out_dir: Option<String>,
    pub data: DataConfig,
    pub gen: GenConfig,
    pub patch: PatchConfig,
    pub eval: EvalConfig,
    pub plot: PlotConfig,
    pub sweep: SweepConfig,
}

/// Flag-level overrides; any set field wins over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub deterministic: bool,
    pub out: Option<PathBuf>,
    pub sigma_prior: Option<f64>,
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    pub tau: Option<f64>,
    pub portion: Option<f64>,
    pub patch_mode: Option<String>,
    pub epochs: Option<usize>,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliFailure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    let mut config: RunConfig = toml::from_str(&text)
        .map_err(|e| CliFailure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if overrides.deterministic {
        config.deterministic = true;
    }
    if let Some(out) = &overrides.out {
        config.out_dir = Some(out.display().to_string());
    }
    if let Some(v) = overrides.sigma_prior {
        config.gen.sigma_prior = v;
    }
    if let Some(v) = overrides.delta_min {
        config.gen.delta_min = v;
    }
    if let Some(v) = overrides.delta_max {
        config.gen.delta_max = v;
    }
    if let Some(v) = overrides.tau {
        config.patch.tau = v;
    }
    if let Some(v) = overrides.portion {
        config.patch.portion = v;
    }
    if let Some(mode) = &overrides.patch_mode {
        config.patch.mode = match mode.as_str() {
            "deviation" => PatchMode::Deviation,
            "length" => PatchMode::Length,
            "none" => PatchMode::None,
            other => {
                return Err(CliFailure::new(
                    EXIT_CONFIG,
                    format!("unknown patch mode {other:?}"),
                ))
            }
        };
    }
    if let Some(v) = overrides.epochs {
        config.gen.max_epochs = v;
    }
    config.gen.validate().map_err(fail(EXIT_CONFIG))?;
    config.patch.validate().map_err(fail(EXIT_CONFIG))?;
    Ok(config)
}

/// Output directory: flag/config value, resolved against the
/// GENIAS_OUT_ROOT environment variable when relative.
pub fn resolve_out_dir(config: &RunConfig) -> CliResult<PathBuf> {
    let raw = config.out_dir.clone().unwrap_or_else(|| ".".into());
    let path = PathBuf::from(&raw);
    let resolved = if path.is_relative() {
        match std::env::var_os("GENIAS_OUT_ROOT") {
            Some(root) => PathBuf::from(root).join(path),
            None => path,
        }
    } else {
        path
    };
    std::fs::create_dir_all(&resolved)
        .map_err(|e| CliFailure::new(EXIT_DATA, format!("{}: {e}", resolved.display())))?;
    Ok(resolved)
}

fn write_resolved_config(config: &RunConfig, out_dir: &Path) -> CliResult<()> {
    let text = toml::to_string_pretty(config)
        .map_err(|e| CliFailure::new(EXIT_CONFIG, e.to_string()))?;
    std::fs::write(out_dir.join("config.resolved.toml"), text)
        .map_err(|e| CliFailure::new(EXIT_DATA, e.to_string()))
}

fn load_train_series(config: &RunConfig) -> CliResult<RawSeries> {
    let path = config
        .data
        .train
        .as_ref()
        .ok_or_else(|| CliFailure::new(EXIT_DATA, "config has no data.train path"))?;
    load_series(Path::new(path), config.data.format.into()).map_err(fail(EXIT_DATA))
}

fn train_windows_of(config: &RunConfig, series: &RawSeries) -> CliResult<Vec<WindowTensor>> {
    if series.dims() != config.gen.dims {
        return Err(CliFailure::new(
            EXIT_CONFIG,
            format!(
                "config gen.dims = {} but {} has {} dimensions",
                config.gen.dims,
                series.name,
                series.dims()
            ),
        ));
    }
    let stride = config.data.train_stride.unwrap_or(config.gen.window_len);
    make_windows(series, config.gen.window_len, stride).map_err(fail(EXIT_DATA))
}

/// Train, writing `checkpoint.gvae`, `train_log.jsonl`, periodic
/// checkpoints every 100 epochs, and the resolved config snapshot.
pub fn cmd_train(config: &RunConfig) -> CliResult<PathBuf> {
    let out_dir = resolve_out_dir(config)?;
    let series = load_train_series(config)?;
    let windows = train_windows_of(config, &series)?;
    let stats = fit_normalizer(&windows).map_err(fail(EXIT_DATA))?;
    let normalized = apply_normalizer(&windows, &stats).map_err(fail(EXIT_DATA))?;

    write_resolved_config(config, &out_dir)?;
    let log_path = out_dir.join("train_log.jsonl");
    let log_file = File::create(&log_path)
        .map_err(|e| CliFailure::new(EXIT_DATA, format!("{}: {e}", log_path.display())))?;
    let mut log = BufWriter::new(log_file);

    println!(
        "training on {} windows of shape ({}, {}) for up to {} epochs",
        normalized.len(),
        config.gen.window_len,
        config.gen.dims,
        config.gen.max_epochs
    );
    let stats_for_observer = stats.clone();
    let result = train_with_observer(&normalized, &config.gen, config.seed, |record, model| {
        let line = serde_json::to_string(record)
            .map_err(|e| GeniasError::Validation(e.to_string()))?;
        writeln!(log, "{line}").map_err(|e| GeniasError::io(log_path.display().to_string(), e))?;
        if record.epoch > 0 && record.epoch % 100 == 0 {
            let mut snapshot = model.clone();
            snapshot.norm = Some(stats_for_observer.clone());
            save_checkpoint(
                &snapshot,
                &out_dir.join(format!("checkpoint_epoch{:05}.gvae", record.epoch)),
            )?;
        }
        Ok(())
    });
    let mut result = match result {
        Ok(r) => r,
        Err(e @ GeniasError::TrainingAbort { .. }) => {
            return Err(CliFailure::new(EXIT_TRAINING, e.to_string()))
        }
        Err(e) => return Err(CliFailure::new(EXIT_DATA, e.to_string())),
    };
    result.model.norm = Some(stats);
    let ckpt = out_dir.join("checkpoint.gvae");
    save_checkpoint(&result.model, &ckpt).map_err(fail(EXIT_DATA))?;
    println!(
        "finished after {} epochs; final total loss {:.6}",
        result.history.len(),
        result.history.last().map(|r| r.total).unwrap_or(f64::NAN)
    );
    Ok(ckpt)
}

fn load_model(path: &Path) -> CliResult<ModelParams> {
    load_checkpoint(path).map_err(fail(EXIT_CHECKPOINT))
}

fn normalize_with_model(
    model: &ModelParams,
    windows: &[WindowTensor],
) -> CliResult<(Vec<WindowTensor>, NormStats)> {
    let stats = model.norm.clone().ok_or_else(|| {
        CliFailure::new(
            EXIT_CHECKPOINT,
            "checkpoint carries no normalization stats; retrain with cmd train",
        )
    })?;
    let normalized = apply_normalizer(windows, &stats).map_err(fail(EXIT_CHECKPOINT))?;
    Ok((normalized, stats))
}

/// Generate and patch anomalies for every training window; writes
/// `injected.gts`, `injected.mask`, `injected.manifest.json`.
pub fn cmd_inject(config: &RunConfig, checkpoint: &Path) -> CliResult<()> {
    let out_dir = resolve_out_dir(config)?;
    let model = load_model(checkpoint)?;
    let series = load_train_series(config)?;
    let windows = train_windows_of(config, &series)?;
    if model.dims != config.gen.dims || model.window_len != config.gen.window_len {
        return Err(CliFailure::new(
            EXIT_CHECKPOINT,
            format!(
                "checkpoint expects ({}, {}) windows but config requests ({}, {})",
                model.window_len, model.dims, config.gen.window_len, config.gen.dims
            ),
        ));
    }
    let (normalized, _) = normalize_with_model(&model, &windows)?;

    write_resolved_config(config, &out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let patched = batch_inject(&model, &normalized, &config.patch, &mut rng)
        .map_err(fail(EXIT_CHECKPOINT))?;
    let hash = file_sha256(checkpoint).map_err(fail(EXIT_CHECKPOINT))?;
    let manifest = InjectionManifest::new(
        hash,
        &config.patch,
        config.seed,
        patched.len(),
        model.window_len,
        model.dims,
    );
    save_injected(
        &patched,
        &out_dir.join("injected.gts"),
        &out_dir.join("injected.mask"),
        &out_dir.join("injected.manifest.json"),
        &manifest,
    )
    .map_err(fail(EXIT_DATA))?;
    println!("injected {} windows into {}", patched.len(), out_dir.display());
    Ok(())
}

struct EvalInputs {
    model: ModelParams,
    model_hash: String,
    train_normals: Vec<WindowTensor>,
    injected: Vec<WindowTensor>,
    test_windows: Vec<WindowTensor>,
    test_labels: Vec<u8>,
    dataset: String,
}

fn gather_eval_inputs(
    config: &RunConfig,
    checkpoint: &Path,
    injected_dir: &Path,
) -> CliResult<EvalInputs> {
    let model = load_model(checkpoint)?;
    let model_hash = file_sha256(checkpoint).map_err(fail(EXIT_CHECKPOINT))?;

    let windows_path = injected_dir.join("injected.gts");
    let mask_path = injected_dir.join("injected.mask");
    let manifest_path = injected_dir.join("injected.manifest.json");
    for p in [&windows_path, &mask_path, &manifest_path] {
        if !p.exists() {
            return Err(CliFailure::new(
                EXIT_ARTIFACTS,
                format!("missing injected artifact {}", p.display()),
            ));
        }
    }
    let (injected, _, _) = load_injected(&windows_path, &mask_path, &manifest_path)
        .map_err(fail(EXIT_ARTIFACTS))?;

    let train_series = load_train_series(config)?;
    let train_windows = train_windows_of(config, &train_series)?;
    let (train_normals, _) = normalize_with_model(&model, &train_windows)?;

    let test_path = config
        .data
        .test
        .as_ref()
        .ok_or_else(|| CliFailure::new(EXIT_ARTIFACTS, "config has no data.test path"))?;
    let test_series =
        load_series(Path::new(test_path), config.data.format.into()).map_err(fail(EXIT_DATA))?;
    if test_series.labels.is_none() {
        return Err(CliFailure::new(
            EXIT_ARTIFACTS,
            format!("{test_path}: no labels found (expected sibling .labels.csv)"),
        ));
    }
    let stride = config.data.eval_stride.unwrap_or(1);
    let test_raw =
        make_windows(&test_series, config.gen.window_len, stride).map_err(fail(EXIT_DATA))?;
    let (test_windows, _) = normalize_with_model(&model, &test_raw)?;
    let test_labels: Vec<u8> = test_windows
        .iter()
        .map(|w| u8::from(w.label == Some(true)))
        .collect();
    Ok(EvalInputs {
        model,
        model_hash,
        train_normals,
        injected,
        test_windows,
        test_labels,
        dataset: test_series.name,
    })
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| CliFailure::new(EXIT_DATA, e.to_string()))?;
    std::fs::write(path, text)
        .map_err(|e| CliFailure::new(EXIT_DATA, format!("{}: {e}", path.display())))
}

/// Metric reports: generation quality (ARP/EDI) and detection utility for
/// both the classifier detector and the reconstruction-score baseline.
pub fn cmd_evaluate(config: &RunConfig, checkpoint: &Path, injected_dir: &Path) -> CliResult<()> {
    let out_dir = resolve_out_dir(config)?;
    let inputs = gather_eval_inputs(config, checkpoint, injected_dir)?;
    write_resolved_config(config, &out_dir)?;

    let real_anomalies: Vec<WindowTensor> = inputs
        .test_windows
        .iter()
        .zip(&inputs.test_labels)
        .filter(|(_, &l)| l == 1)
        .map(|(w, _)| w.clone())
        .collect();
    if real_anomalies.is_empty() || real_anomalies.len() == inputs.test_labels.len() {
        return Err(CliFailure::new(
            EXIT_ARTIFACTS,
            "test set must contain both normal and anomalous windows",
        ));
    }

    // Generation quality over the shared one-class embedding.
    let embedder =
        train_embedder(&inputs.train_normals, config.seed + 1).map_err(fail(EXIT_DATA))?;
    let v_real = embedder.embed_batch(&real_anomalies).map_err(fail(EXIT_DATA))?;
    let v_gen = embedder.embed_batch(&inputs.injected).map_err(fail(EXIT_DATA))?;
    let k = config.eval.k.unwrap_or_else(|| default_k(v_gen.len()));
    let partition = build_partition(&v_gen, k, config.seed + 3).map_err(fail(EXIT_DATA))?;
    let report = GenQualityReport {
        arp: arp(&v_real, &v_gen).map_err(fail(EXIT_DATA))?,
        edi: edi(&v_gen, &partition).map_err(fail(EXIT_DATA))?,
        k,
        n_real: v_real.len(),
        n_gen: v_gen.len(),
        embedder_hash: embedder.params_hash(),
        seed: config.seed,
    };
    write_json(&report, &out_dir.join("gen_quality.json"))?;

    // Detection utility: classifier trained on normals vs generated.
    let classifier =
        train_classifier_detector(&inputs.train_normals, &inputs.injected, config.seed + 2)
            .map_err(fail(EXIT_DATA))?;
    let cls_scores = classifier
        .score_batch(&inputs.test_windows)
        .map_err(fail(EXIT_DATA))?;
    let prevalence = inputs.test_labels.iter().filter(|&&l| l == 1).count() as f64
        / inputs.test_labels.len() as f64;
    let scored = ScoredWindows::new(cls_scores, inputs.test_labels.clone())
        .map_err(fail(EXIT_ARTIFACTS))?;
    let m = detection_metrics(&scored).map_err(fail(EXIT_ARTIFACTS))?;
    let cls_report = DetectionReport {
        dataset: inputs.dataset.clone(),
        model_hash: inputs.model_hash.clone(),
        detector: "classifier".into(),
        best_f1: m.best_f1,
        best_threshold: m.best_threshold,
        aupr: m.aupr,
        auroc: m.auroc,
        n_windows: inputs.test_windows.len(),
        prevalence,
    };
    write_json(&cls_report, &out_dir.join("detection_classifier.json"))?;

    // Reconstruction-error baseline from the generator itself.
    let rec_scores = recon_score(&inputs.model, &inputs.test_windows).map_err(fail(EXIT_DATA))?;
    let scored = ScoredWindows::new(rec_scores, inputs.test_labels.clone())
        .map_err(fail(EXIT_ARTIFACTS))?;
    let m = detection_metrics(&scored).map_err(fail(EXIT_ARTIFACTS))?;
    let rec_report = DetectionReport {
        dataset: inputs.dataset,
        model_hash: inputs.model_hash,
        detector: "recon".into(),
        best_f1: m.best_f1,
        best_threshold: m.best_threshold,
        aupr: m.aupr,
        auroc: m.auroc,
        n_windows: inputs.test_windows.len(),
        prevalence,
    };
    write_json(&rec_report, &out_dir.join("detection_recon.json"))?;
    println!(
        "evaluation written to {} (classifier auroc {:.4}, recon auroc {:.4})",
        out_dir.display(),
        cls_report.auroc,
        rec_report.auroc
    );
    Ok(())
}

/// Run the self-contained verification grid; exit 0 only if every check
/// holds. `lemma1_tolerance` tightens or loosens the optimal-variance
/// residual bound (default 1e-6).
pub fn cmd_verify(config: &RunConfig, lemma1_tolerance: f64) -> CliResult<()> {
    let out_dir = resolve_out_dir(config)?;
    let mut report = run_verification(config.seed).map_err(fail(EXIT_DATA))?;
    if lemma1_tolerance != 1e-6 {
        for check in &mut report.checks {
            if check.name == "lemma1_optimal_variance" {
                check.tolerance = lemma1_tolerance;
                let residual = check.values["residual"].as_f64().unwrap_or(f64::NAN);
                check.holds = residual <= lemma1_tolerance;
            }
        }
        report.all_hold = report.checks.iter().all(|c| c.holds);
    }
    write_json(&report, &out_dir.join("verification.json"))?;
    if report.all_hold {
        println!("all {} verification checks hold", report.checks.len());
        Ok(())
    } else {
        let failures = report.failures();
        let mut message = format!("{} verification check(s) failed:", failures.len());
        for f in failures {
            message.push_str(&format!("\n  {} inputs={}", f.name, f.inputs));
        }
        Err(CliFailure::new(EXIT_VERIFY, message))
    }
}

/// Reconstruction-error histogram (normal vs anomalous test windows) and
/// original-versus-patched overlays for the first injected windows.
pub fn cmd_plot(config: &RunConfig, checkpoint: &Path, injected_dir: &Path) -> CliResult<()> {
    let out_dir = resolve_out_dir(config)?;
    let inputs = gather_eval_inputs(config, checkpoint, injected_dir)?;

    let scores = recon_score(&inputs.model, &inputs.test_windows).map_err(fail(EXIT_DATA))?;
    let normal_scores: Vec<f64> = scores
        .iter()
        .zip(&inputs.test_labels)
        .filter(|(_, &l)| l == 0)
        .map(|(s, _)| *s)
        .collect();
    let anomalous_scores: Vec<f64> = scores
        .iter()
        .zip(&inputs.test_labels)
        .filter(|(_, &l)| l == 1)
        .map(|(s, _)| *s)
        .collect();
    score_histogram_svg(
        &normal_scores,
        "normal",
        &anomalous_scores,
        "anomalous",
        config.plot.bins,
        config.plot.log_y,
        &out_dir.join("recon_hist.svg"),
    )
    .map_err(fail(EXIT_ARTIFACTS))?;

    let (injected, masks, _) = load_injected(
        &injected_dir.join("injected.gts"),
        &injected_dir.join("injected.mask"),
        &injected_dir.join("injected.manifest.json"),
    )
    .map_err(fail(EXIT_ARTIFACTS))?;
    let count = config
        .plot
        .max_overlays
        .min(injected.len())
        .min(inputs.train_normals.len());
    for i in 0..count {
        overlay_svg(
            &inputs.train_normals[i].data.view(),
            &injected[i].data.view(),
            &masks[i],
            &out_dir.join(format!("overlay_w{i}.svg")),
        )
        .map_err(fail(EXIT_ARTIFACTS))?;
    }
    println!("wrote histogram and {count} overlay(s) to {}", out_dir.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct SweepEntry {
    sigma_prior: f64,
    tau: f64,
    best_f1: f64,
    aupr: f64,
    auroc: f64,
    arp: f64,
    edi: f64,
}

/// Run a (sigma_prior x tau) grid of train/inject/evaluate pipelines and
/// aggregate the reports.
pub fn cmd_sweep(config: &RunConfig) -> CliResult<()> {
    let out_dir = resolve_out_dir(config)?;
    let priors = if config.sweep.sigma_prior.is_empty() {
        vec![config.gen.sigma_prior]
    } else {
        config.sweep.sigma_prior.clone()
    };
    let taus = if config.sweep.tau.is_empty() {
        vec![config.patch.tau]
    } else {
        config.sweep.tau.clone()
    };

    let mut entries = Vec::new();
    for (pi, &sigma_prior) in priors.iter().enumerate() {
        for (ti, &tau) in taus.iter().enumerate() {
            let mut sub = config.clone();
            sub.gen.sigma_prior = sigma_prior;
            sub.patch.tau = tau;
            let sub_dir = out_dir.join(format!("grid_p{pi}_t{ti}"));
            sub.out_dir = Some(sub_dir.display().to_string());
            println!("sweep point sigma_prior={sigma_prior} tau={tau}");
            let ckpt = cmd_train(&sub)?;
            cmd_inject(&sub, &ckpt)?;
            cmd_evaluate(&sub, &ckpt, &sub_dir)?;

            let detection: DetectionReport = read_json(&sub_dir.join("detection_classifier.json"))?;
            let quality: GenQualityReport = read_json(&sub_dir.join("gen_quality.json"))?;
            entries.push(SweepEntry {
                sigma_prior,
                tau,
                best_f1: detection.best_f1,
                aupr: detection.aupr,
                auroc: detection.auroc,
                arp: quality.arp,
                edi: quality.edi,
            });
        }
    }
    write_json(&entries, &out_dir.join("sweep_results.json"))?;
    println!("sweep aggregated {} grid points", entries.len());
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliFailure::new(EXIT_ARTIFACTS, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliFailure::new(EXIT_ARTIFACTS, format!("{}: {e}", path.display())))
}
