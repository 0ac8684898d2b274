//! Raw series containers and file loaders.
//!
//! Two on-disk forms are supported:
//! - CSV with a `dim_0,...,dim_{D-1}` header, one row per timestep, and an
//!   optional sibling `<name>.labels.csv` holding a single `label` column
//!   of 0/1 flags per timestep.
//! - A binary container: magic `GTS1`, u32 N, u32 D (little endian), then
//!   N*D f64 values row-major.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::error::{GeniasError, Result};

pub const SERIES_MAGIC: &[u8; 4] = b"GTS1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesFormat {
    Csv,
    Binary,
}

/// A full time series with optional per-timestep anomaly labels.
#[derive(Debug, Clone)]
pub struct RawSeries {
    /// Shape (N_timesteps, D).
    pub values: Array2<f64>,
    /// One 0/1 flag per timestep when labels are available.
    pub labels: Option<Vec<u8>>,
    pub name: String,
}

impl RawSeries {
    pub fn new(values: Array2<f64>, labels: Option<Vec<u8>>, name: impl Into<String>) -> Result<Self> {
        if let Some((r, c)) = values
            .indexed_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(idx, _)| idx)
        {
            return Err(GeniasError::Validation(format!(
                "non-finite value at row {r}, column {c}"
            )));
        }
        if let Some(l) = &labels {
            if l.len() != values.nrows() {
                return Err(GeniasError::Validation(format!(
                    "labels length {} does not match {} timesteps",
                    l.len(),
                    values.nrows()
                )));
            }
            if let Some(bad) = l.iter().find(|&&v| v > 1) {
                return Err(GeniasError::Validation(format!(
                    "labels must be 0 or 1, found {bad}"
                )));
            }
        }
        Ok(RawSeries {
            values,
            labels,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dims(&self) -> usize {
        self.values.ncols()
    }
}

fn labels_path(path: &Path) -> PathBuf {
    path.with_extension("labels.csv")
}

pub fn load_series(path: &Path, format: SeriesFormat) -> Result<RawSeries> {
    let values = match format {
        SeriesFormat::Csv => load_csv_values(path)?,
        SeriesFormat::Binary => load_binary_values(path)?,
    };
    let lpath = labels_path(path);
    let labels = if lpath.exists() {
        Some(load_labels(&lpath, values.nrows())?)
    } else {
        None
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    RawSeries::new(values, labels, name)
}

fn load_csv_values(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dims = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| GeniasError::io(path.display().to_string(), e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 {
            // Header row; cell count fixes D.
            dims = Some(line.split(',').count());
            continue;
        }
        let mut row = Vec::with_capacity(dims.unwrap_or(1));
        for (col, cell) in line.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| GeniasError::Parse {
                path: path.display().to_string(),
                row: lineno,
                col,
                reason: format!("non-numeric cell {cell:?}"),
            })?;
            row.push(v);
        }
        let d = dims.unwrap_or(row.len());
        if row.len() != d {
            return Err(GeniasError::Parse {
                path: path.display().to_string(),
                row: lineno,
                col: row.len(),
                reason: format!("expected {d} columns, got {}", row.len()),
            });
        }
        rows.push(row);
    }
    let d = dims.ok_or_else(|| GeniasError::Validation(format!("{}: empty file", path.display())))?;
    if rows.is_empty() {
        return Err(GeniasError::Validation(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let n = flat.len() / d;
    Array2::from_shape_vec((n, d), flat)
        .map_err(|e| GeniasError::Validation(format!("{}: {e}", path.display())))
}

fn load_labels(path: &Path, expected_len: usize) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut labels = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| GeniasError::io(path.display().to_string(), e))?;
        let line = line.trim();
        if line.is_empty() || lineno == 0 {
            continue;
        }
        let v: u8 = line.parse().map_err(|_| GeniasError::Parse {
            path: path.display().to_string(),
            row: lineno,
            col: 0,
            reason: format!("label must be 0 or 1, got {line:?}"),
        })?;
        labels.push(v);
    }
    if labels.len() != expected_len {
        return Err(GeniasError::Validation(format!(
            "{}: {} labels for {} timesteps",
            path.display(),
            labels.len(),
            expected_len
        )));
    }
    Ok(labels)
}

fn load_binary_values(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    let mut reader = BufReader::new(file);
    let mut magic = [0u8; 4];
    reader
        .read_exact(&mut magic)
        .map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    if &magic != SERIES_MAGIC {
        return Err(GeniasError::Validation(format!(
            "{}: bad magic bytes {magic:?}",
            path.display()
        )));
    }
    let n = reader
        .read_u32::<LittleEndian>()
        .map_err(|e| GeniasError::io(path.display().to_string(), e))? as usize;
    let d = reader
        .read_u32::<LittleEndian>()
        .map_err(|e| GeniasError::io(path.display().to_string(), e))? as usize;
    let mut flat = vec![0f64; n * d];
    reader
        .read_f64_into::<LittleEndian>(&mut flat)
        .map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    Array2::from_shape_vec((n, d), flat)
        .map_err(|e| GeniasError::Validation(format!("{}: {e}", path.display())))
}

pub fn save_series_csv(series: &RawSeries, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let d = series.dims();
    let header: Vec<String> = (0..d).map(|i| format!("dim_{i}")).collect();
    writeln!(w, "{}", header.join(",")).map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    for row in series.values.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", cells.join(","))
            .map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    }
    if let Some(labels) = &series.labels {
        let lpath = labels_path(path);
        let lfile =
            File::create(&lpath).map_err(|e| GeniasError::io(lpath.display().to_string(), e))?;
        let mut lw = BufWriter::new(lfile);
        writeln!(lw, "label").map_err(|e| GeniasError::io(lpath.display().to_string(), e))?;
        for l in labels {
            writeln!(lw, "{l}").map_err(|e| GeniasError::io(lpath.display().to_string(), e))?;
        }
    }
    Ok(())
}

pub fn save_series_binary(series: &RawSeries, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    w.write_all(SERIES_MAGIC)
        .map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    w.write_u32::<LittleEndian>(series.len() as u32)
        .map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    w.write_u32::<LittleEndian>(series.dims() as u32)
        .map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    for v in series.values.iter() {
        w.write_f64::<LittleEndian>(*v)
            .map_err(|e| GeniasError::io(path.display().to_string(), e))?;
    }
    Ok(())
}
