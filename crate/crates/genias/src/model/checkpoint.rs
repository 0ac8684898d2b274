//! Checkpoint persistence with a deterministic byte layout.
//!
//! Layout: magic `GVAE`, u16 format version, a fixed-order architecture
//! header, then named parameter blobs (u32 name length, name bytes,
//! u32 rows, u32 cols, row-major little-endian f64 payload). Normalization
//! stats ride along as `norm.min` / `norm.max` blobs when present.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use crate::config::{ArchDescriptor, GenConfig};
use crate::data::NormStats;
use crate::error::{GeniasError, Result};
use crate::model::{init_model, ModelParams};

const MAGIC: &[u8; 4] = b"GVAE";
const VERSION: u16 = 1;

fn ck<T>(r: std::io::Result<T>, path: &Path) -> Result<T> {
    r.map_err(|e| GeniasError::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn save_checkpoint(model: &ModelParams, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    ck(w.write_all(MAGIC), path)?;
    ck(w.write_u16::<LittleEndian>(VERSION), path)?;
    ck(w.write_u32::<LittleEndian>(model.window_len as u32), path)?;
    ck(w.write_u32::<LittleEndian>(model.dims as u32), path)?;
    ck(w.write_u32::<LittleEndian>(model.latent as u32), path)?;
    ck(w.write_u8(model.psi_per_dim as u8), path)?;
    ck(w.write_u8(model.norm.is_some() as u8), path)?;
    ck(w.write_u8(model.arch.channels.len() as u8), path)?;
    ck(w.write_u32::<LittleEndian>(model.arch.kernel_size as u32), path)?;
    ck(w.write_f64::<LittleEndian>(model.arch.dropout), path)?;
    for (&c, &d) in model.arch.channels.iter().zip(&model.arch.dilations) {
        ck(w.write_u32::<LittleEndian>(c as u32), path)?;
        ck(w.write_u32::<LittleEndian>(d as u32), path)?;
    }

    let mut blobs: Vec<(String, Array2<f64>)> = model
        .named_params()
        .into_iter()
        .map(|(n, p)| (n, p.clone()))
        .collect();
    if let Some(norm) = &model.norm {
        blobs.push(("norm.min".into(), to_row(&norm.min)));
        blobs.push(("norm.max".into(), to_row(&norm.max)));
    }
    ck(w.write_u32::<LittleEndian>(blobs.len() as u32), path)?;
    for (name, tensor) in &blobs {
        let bytes = name.as_bytes();
        ck(w.write_u32::<LittleEndian>(bytes.len() as u32), path)?;
        ck(w.write_all(bytes), path)?;
        ck(w.write_u32::<LittleEndian>(tensor.nrows() as u32), path)?;
        ck(w.write_u32::<LittleEndian>(tensor.ncols() as u32), path)?;
        for v in tensor.iter() {
            ck(w.write_f64::<LittleEndian>(*v), path)?;
        }
    }
    Ok(())
}

fn to_row(v: &Array1<f64>) -> Array2<f64> {
    v.clone().insert_axis(ndarray::Axis(0))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let file = File::open(path).map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    ck(r.read_exact(&mut magic), path)?;
    if &magic != MAGIC {
        return Err(GeniasError::Checkpoint(format!(
            "{}: bad magic bytes {magic:?}",
            path.display()
        )));
    }
    let version = ck(r.read_u16::<LittleEndian>(), path)?;
    if version != VERSION {
        return Err(GeniasError::Checkpoint(format!(
            "{}: unsupported format version {version}",
            path.display()
        )));
    }
    let window_len = ck(r.read_u32::<LittleEndian>(), path)? as usize;
    let dims = ck(r.read_u32::<LittleEndian>(), path)? as usize;
    let latent = ck(r.read_u32::<LittleEndian>(), path)? as usize;
    let psi_per_dim = ck(r.read_u8(), path)? != 0;
    let has_norm = ck(r.read_u8(), path)? != 0;
    let n_blocks = ck(r.read_u8(), path)? as usize;
    let kernel_size = ck(r.read_u32::<LittleEndian>(), path)? as usize;
    let dropout = ck(r.read_f64::<LittleEndian>(), path)?;
    let mut channels = Vec::with_capacity(n_blocks);
    let mut dilations = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        channels.push(ck(r.read_u32::<LittleEndian>(), path)? as usize);
        dilations.push(ck(r.read_u32::<LittleEndian>(), path)? as usize);
    }
    let arch = ArchDescriptor {
        channels,
        dilations,
        kernel_size,
        dropout,
    };

    let n_blobs = ck(r.read_u32::<LittleEndian>(), path)? as usize;
    let mut blobs: HashMap<String, Array2<f64>> = HashMap::with_capacity(n_blobs);
    for _ in 0..n_blobs {
        let name_len = ck(r.read_u32::<LittleEndian>(), path)? as usize;
        if name_len > 4096 {
            return Err(GeniasError::Checkpoint(format!(
                "{}: implausible blob name length {name_len}",
                path.display()
            )));
        }
        let mut name = vec![0u8; name_len];
        ck(r.read_exact(&mut name), path)?;
        let name = String::from_utf8(name)
            .map_err(|e| GeniasError::Checkpoint(format!("{}: {e}", path.display())))?;
        let rows = ck(r.read_u32::<LittleEndian>(), path)? as usize;
        let cols = ck(r.read_u32::<LittleEndian>(), path)? as usize;
        let mut flat = vec![0f64; rows * cols];
        ck(r.read_f64_into::<LittleEndian>(&mut flat), path)?;
        let tensor = Array2::from_shape_vec((rows, cols), flat)
            .map_err(|e| GeniasError::Checkpoint(format!("{}: {e}", path.display())))?;
        blobs.insert(name, tensor);
    }

    // Rebuild the skeleton, then overwrite every tensor from the blobs.
    let mut config = GenConfig::for_dims(dims);
    config.window_len = window_len;
    config.latent = Some(latent);
    config.psi_per_dim = psi_per_dim;
    config.arch = arch;
    let mut model = init_model(&config, 0)?;

    let names: Vec<String> = model.named_params().iter().map(|(n, _)| n.clone()).collect();
    let expected_shapes: Vec<(usize, usize)> = model
        .named_params()
        .iter()
        .map(|(_, p)| (p.nrows(), p.ncols()))
        .collect();
    for ((name, shape), target) in names
        .iter()
        .zip(expected_shapes.iter())
        .zip(model.param_refs_mut())
    {
        let tensor = blobs.remove(name).ok_or_else(|| {
            GeniasError::Checkpoint(format!("{}: missing parameter {name}", path.display()))
        })?;
        if (tensor.nrows(), tensor.ncols()) != *shape {
            return Err(GeniasError::Checkpoint(format!(
                "{}: parameter {name} has shape ({}, {}), expected {:?}",
                path.display(),
                tensor.nrows(),
                tensor.ncols(),
                shape
            )));
        }
        *target = tensor;
    }
    if has_norm {
        let min = blobs.remove("norm.min").ok_or_else(|| {
            GeniasError::Checkpoint(format!("{}: missing norm.min", path.display()))
        })?;
        let max = blobs.remove("norm.max").ok_or_else(|| {
            GeniasError::Checkpoint(format!("{}: missing norm.max", path.display()))
        })?;
        model.norm = Some(NormStats {
            min: min.row(0).to_owned(),
            max: max.row(0).to_owned(),
        });
    }
    if !blobs.is_empty() {
        let extra: Vec<&String> = blobs.keys().collect();
        return Err(GeniasError::Checkpoint(format!(
            "{}: unexpected parameters {extra:?}",
            path.display()
        )));
    }
    Ok(model)
}

/// Hex SHA-256 of a file, used to pin artifacts in manifests.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher)
        .map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    Ok(format!("{:x}", hasher.finalize()))
}
