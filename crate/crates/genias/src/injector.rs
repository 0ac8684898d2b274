//! Post-training anomaly synthesis: perturbed generation plus patching.
//!
//! Deviation patching works per dimension: a cell is replaced when its
//! squared deviation from the source exceeds tau times that dimension's
//! amplitude (max minus min). Length patching replaces one contiguous
//! seeded span covering a fixed portion of the window.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{PatchConfig, PatchMode};
use crate::data::WindowTensor;
use crate::error::{GeniasError, Result};
use crate::model::{perturb_latent, ModelParams};

/// A generated window composed back into its source, with the replacement
/// mask (1 = generated cell, 0 = original cell).
#[derive(Debug, Clone, PartialEq)]
pub struct PatchedWindow {
    pub data: WindowTensor,
    pub mask: Array2<u8>,
    pub source: (String, usize),
}

/// Phase 1: encode, perturb the latent standard deviation, decode.
pub fn generate_anomaly(
    model: &ModelParams,
    x: &ArrayView2<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>> {
    let lat = model.encode(x)?;
    let z_tilde = perturb_latent(&lat, model.perturbation(), rng);
    model.decode(&z_tilde.view())
}

fn check_pair(x: &ArrayView2<f64>, xtilde: &ArrayView2<f64>) -> Result<()> {
    if x.shape() != xtilde.shape() {
        return Err(GeniasError::Shape {
            expected: format!("{:?}", x.shape()),
            actual: format!("{:?}", xtilde.shape()),
        });
    }
    Ok(())
}

fn compose(
    x: &ArrayView2<f64>,
    xtilde: &ArrayView2<f64>,
    mask: Array2<u8>,
    origin: (String, usize),
) -> Result<PatchedWindow> {
    let mut data = x.to_owned();
    for ((t, d), m) in mask.indexed_iter() {
        if *m == 1 {
            data[[t, d]] = xtilde[[t, d]];
        }
    }
    Ok(PatchedWindow {
        data: WindowTensor::new(data, origin.clone(), Some(true))?,
        mask,
        source: origin,
    })
}

/// Phase 2, cell-level rule: replace cell (t, d) iff
/// (X[t,d] - Xtilde[t,d])^2 > tau * (max(X_d) - min(X_d)).
pub fn deviation_patch(
    x: &ArrayView2<f64>,
    xtilde: &ArrayView2<f64>,
    tau: f64,
) -> Result<PatchedWindow> {
    deviation_patch_from(x, xtilde, tau, ("patched".into(), 0))
}

pub fn deviation_patch_from(
    x: &ArrayView2<f64>,
    xtilde: &ArrayView2<f64>,
    tau: f64,
    origin: (String, usize),
) -> Result<PatchedWindow> {
    check_pair(x, xtilde)?;
    if !(tau >= 0.0) {
        return Err(GeniasError::Param(format!("tau must be >= 0, got {tau}")));
    }
    let mut mask = Array2::zeros(x.raw_dim());
    for d in 0..x.ncols() {
        let col = x.column(d);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in col.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let threshold = tau * (hi - lo);
        for t in 0..x.nrows() {
            let dev = x[[t, d]] - xtilde[[t, d]];
            if dev * dev > threshold {
                mask[[t, d]] = 1;
            }
        }
    }
    compose(x, xtilde, mask, origin)
}

/// Aggregated variant: one comparison per dimension using the mean squared
/// deviation; the whole dimension is replaced or kept.
pub fn deviation_patch_dimwise(
    x: &ArrayView2<f64>,
    xtilde: &ArrayView2<f64>,
    tau: f64,
    origin: (String, usize),
) -> Result<PatchedWindow> {
    check_pair(x, xtilde)?;
    if !(tau >= 0.0) {
        return Err(GeniasError::Param(format!("tau must be >= 0, got {tau}")));
    }
    let mut mask = Array2::zeros(x.raw_dim());
    for d in 0..x.ncols() {
        let col = x.column(d);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut dev_acc = 0.0;
        for (t, &v) in col.iter().enumerate() {
            lo = lo.min(v);
            hi = hi.max(v);
            let dev = v - xtilde[[t, d]];
            dev_acc += dev * dev;
        }
        let mean_dev = dev_acc / x.nrows() as f64;
        if mean_dev > tau * (hi - lo) {
            for t in 0..x.nrows() {
                mask[[t, d]] = 1;
            }
        }
    }
    compose(x, xtilde, mask, origin)
}

/// Replace one contiguous span of round(portion * T) timesteps across all
/// dimensions, starting at a seeded-uniform offset.
pub fn length_patch(
    x: &ArrayView2<f64>,
    xtilde: &ArrayView2<f64>,
    portion: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PatchedWindow> {
    length_patch_from(x, xtilde, portion, rng, ("patched".into(), 0))
}

pub fn length_patch_from(
    x: &ArrayView2<f64>,
    xtilde: &ArrayView2<f64>,
    portion: f64,
    rng: &mut ChaCha8Rng,
    origin: (String, usize),
) -> Result<PatchedWindow> {
    check_pair(x, xtilde)?;
    if !(portion > 0.0 && portion <= 1.0) {
        return Err(GeniasError::Param(format!(
            "portion must lie in (0, 1], got {portion}"
        )));
    }
    let t_len = x.nrows();
    let span = ((portion * t_len as f64).round() as usize).clamp(1, t_len);
    let start = rng.gen_range(0..=t_len - span);
    let mut mask = Array2::zeros(x.raw_dim());
    for t in start..start + span {
        for d in 0..x.ncols() {
            mask[[t, d]] = 1;
        }
    }
    compose(x, xtilde, mask, origin)
}

/// Run generation and patching over a window list. One output per input,
/// order preserved; per-window rng streams are derived from `rng` so the
/// whole pass is a pure function of (model, windows, config, rng state).
pub fn batch_inject(
    model: &ModelParams,
    windows: &[WindowTensor],
    patch: &PatchConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PatchedWindow>> {
    patch.validate()?;
    let mut out = Vec::with_capacity(windows.len());
    for w in windows {
        let mut wrng = ChaCha8Rng::seed_from_u64(rng.gen());
        let xtilde = generate_anomaly(model, &w.data.view(), &mut wrng)?;
        let origin = w.origin.clone();
        let patched = match patch.mode {
            PatchMode::Deviation => {
                if patch.per_dimension {
                    deviation_patch_dimwise(&w.data.view(), &xtilde.view(), patch.tau, origin)?
                } else {
                    deviation_patch_from(&w.data.view(), &xtilde.view(), patch.tau, origin)?
                }
            }
            PatchMode::Length => {
                length_patch_from(&w.data.view(), &xtilde.view(), patch.portion, &mut wrng, origin)?
            }
            PatchMode::None => PatchedWindow {
                data: WindowTensor::new(xtilde.clone(), origin.clone(), Some(true))?,
                mask: Array2::ones(xtilde.raw_dim()),
                source: origin,
            },
        };
        out.push(patched);
    }
    Ok(out)
}

/// Provenance record written next to injected datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionManifest {
    pub checkpoint_hash: String,
    pub patch_mode: PatchMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub portion: Option<f64>,
    pub seed: u64,
    pub n_windows: usize,
    pub window_len: usize,
    pub dims: usize,
}

impl InjectionManifest {
    pub fn new(
        checkpoint_hash: String,
        patch: &PatchConfig,
        seed: u64,
        n_windows: usize,
        window_len: usize,
        dims: usize,
    ) -> Self {
        InjectionManifest {
            checkpoint_hash,
            patch_mode: patch.mode,
            tau: (patch.mode == PatchMode::Deviation).then_some(patch.tau),
            portion: (patch.mode == PatchMode::Length).then_some(patch.portion),
            seed,
            n_windows,
            window_len,
            dims,
        }
    }
}

const MASK_MAGIC: &[u8; 4] = b"GTS1";

/// Write windows (stacked rows, binary series layout), masks (same header,
/// u8 payload), and the JSON manifest.
pub fn save_injected(
    patched: &[PatchedWindow],
    windows_path: &Path,
    mask_path: &Path,
    manifest_path: &Path,
    manifest: &InjectionManifest,
) -> Result<()> {
    let first = patched
        .first()
        .ok_or_else(|| GeniasError::Validation("nothing to save".into()))?;
    let t_len = first.data.window_len();
    let dims = first.data.dims();
    let rows = patched.len() * t_len;

    let file =
        File::create(windows_path).map_err(|e| GeniasError::io(windows_path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io = |e| GeniasError::io(windows_path.display().to_string(), e);
    w.write_all(MASK_MAGIC).map_err(io)?;
    w.write_u32::<LittleEndian>(rows as u32).map_err(io)?;
    w.write_u32::<LittleEndian>(dims as u32).map_err(io)?;
    for p in patched {
        for v in p.data.data.iter() {
            w.write_f64::<LittleEndian>(*v).map_err(io)?;
        }
    }
    drop(w);

    let file =
        File::create(mask_path).map_err(|e| GeniasError::io(mask_path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io = |e| GeniasError::io(mask_path.display().to_string(), e);
    w.write_all(MASK_MAGIC).map_err(io)?;
    w.write_u32::<LittleEndian>(rows as u32).map_err(io)?;
    w.write_u32::<LittleEndian>(dims as u32).map_err(io)?;
    for p in patched {
        for m in p.mask.iter() {
            w.write_u8(*m).map_err(io)?;
        }
    }
    drop(w);

    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| GeniasError::Validation(e.to_string()))?;
    std::fs::write(manifest_path, json)
        .map_err(|e| GeniasError::io(manifest_path.display().to_string(), e))?;
    Ok(())
}

/// Read back an injected dataset; returns windows, masks, and the manifest.
pub fn load_injected(
    windows_path: &Path,
    mask_path: &Path,
    manifest_path: &Path,
) -> Result<(Vec<WindowTensor>, Vec<Array2<u8>>, InjectionManifest)> {
    let json = std::fs::read_to_string(manifest_path)
        .map_err(|e| GeniasError::io(manifest_path.display().to_string(), e))?;
    let manifest: InjectionManifest =
        serde_json::from_str(&json).map_err(|e| GeniasError::Validation(e.to_string()))?;

    let file =
        File::open(windows_path).map_err(|e| GeniasError::io(windows_path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let io = |e| GeniasError::io(windows_path.display().to_string(), e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MASK_MAGIC {
        return Err(GeniasError::Validation(format!(
            "{}: bad magic bytes",
            windows_path.display()
        )));
    }
    let rows = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    let dims = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    if rows != manifest.n_windows * manifest.window_len || dims != manifest.dims {
        return Err(GeniasError::Validation(format!(
            "{}: shape does not match manifest",
            windows_path.display()
        )));
    }
    let mut flat = vec![0f64; rows * dims];
    r.read_f64_into::<LittleEndian>(&mut flat).map_err(io)?;

    let t_len = manifest.window_len;
    let mut windows = Vec::with_capacity(manifest.n_windows);
    for i in 0..manifest.n_windows {
        let slice = &flat[i * t_len * dims..(i + 1) * t_len * dims];
        let data = Array2::from_shape_vec((t_len, dims), slice.to_vec())
            .map_err(|e| GeniasError::Validation(e.to_string()))?;
        windows.push(WindowTensor::new(data, ("injected".into(), i * t_len), Some(true))?);
    }

    let file =
        File::open(mask_path).map_err(|e| GeniasError::io(mask_path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let io = |e| GeniasError::io(mask_path.display().to_string(), e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    let mrows = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    let mdims = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    if (mrows, mdims) != (rows, dims) {
        return Err(GeniasError::Validation(format!(
            "{}: mask shape does not match windows",
            mask_path.display()
        )));
    }
    let mut mflat = vec![0u8; rows * dims];
    r.read_exact(&mut mflat).map_err(io)?;
    let masks = (0..manifest.n_windows)
        .map(|i| {
            let slice = &mflat[i * t_len * dims..(i + 1) * t_len * dims];
            Array2::from_shape_vec((t_len, dims), slice.to_vec())
                .map_err(|e| GeniasError::Validation(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((windows, masks, manifest))
}
