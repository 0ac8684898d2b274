//! Desk-scale synthetic corpora and oracle anomaly injection.
//!
//! Everything here is a pure function of its arguments including the seed,
//! so bundled corpora and test fixtures are reproducible bit for bit.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::WindowTensor;
use crate::error::{GeniasError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Two seeded harmonics plus mild noise per dimension.
    SineMix,
    /// A stable order-2 autoregression per dimension.
    ArProcess,
}

impl std::str::FromStr for SynthKind {
    type Err = GeniasError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine_mix" => Ok(SynthKind::SineMix),
            "ar_process" => Ok(SynthKind::ArProcess),
            other => Err(GeniasError::Param(format!("unknown corpus kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    /// Isolated additive extremes of the given magnitude.
    Spike,
    /// The whole segment shifted by the magnitude.
    LevelShift,
    /// Gaussian noise with standard deviation `magnitude` over the segment.
    NoiseBurst,
}

impl std::str::FromStr for AnomalyKind {
    type Err = GeniasError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spike" => Ok(AnomalyKind::Spike),
            "level_shift" => Ok(AnomalyKind::LevelShift),
            "noise_burst" => Ok(AnomalyKind::NoiseBurst),
            other => Err(GeniasError::Param(format!("unknown anomaly kind {other:?}"))),
        }
    }
}

/// Generate `count` normal windows of shape (window_len, dims).
pub fn synth_normal(
    kind: SynthKind,
    window_len: usize,
    dims: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<WindowTensor>> {
    if count == 0 {
        return Err(GeniasError::Param("count must be >= 1".into()));
    }
    if window_len == 0 || dims == 0 {
        return Err(GeniasError::Param("window_len and dims must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = match kind {
        SynthKind::SineMix => format!("sine_mix-{seed}"),
        SynthKind::ArProcess => format!("ar_process-{seed}"),
    };
    let mut windows = Vec::with_capacity(count);
    for i in 0..count {
        let data = match kind {
            SynthKind::SineMix => sine_mix_window(window_len, dims, &mut rng),
            SynthKind::ArProcess => ar2_window(window_len, dims, &mut rng),
        };
        windows.push(WindowTensor {
            data,
            origin: (name.clone(), i * window_len),
            label: Some(false),
        });
    }
    Ok(windows)
}

fn sine_mix_window(t_len: usize, dims: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut data = Array2::zeros((t_len, dims));
    for d in 0..dims {
        let amp1: f64 = rng.gen_range(0.25..0.45);
        let freq1: f64 = rng.gen_range(1.0..3.0);
        let phase1: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let amp2 = amp1 * rng.gen_range(0.2..0.5);
        let freq2 = freq1 * 2.0;
        let phase2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let offset: f64 = rng.gen_range(0.45..0.55);
        for t in 0..t_len {
            let x = t as f64 / t_len as f64;
            let noise: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
            data[[t, d]] = offset
                + amp1 * (std::f64::consts::TAU * freq1 * x + phase1).sin()
                + amp2 * (std::f64::consts::TAU * freq2 * x + phase2).sin()
                + 0.01 * noise;
        }
    }
    data
}

fn ar2_window(t_len: usize, dims: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut data = Array2::zeros((t_len, dims));
    for d in 0..dims {
        // Rejection-sample AR(2) coefficients from the stability triangle.
        let (phi1, phi2) = loop {
            let p1: f64 = rng.gen_range(-1.2..1.2);
            let p2: f64 = rng.gen_range(-0.8..0.8);
            if p2.abs() < 0.95 && p1 + p2 < 0.95 && p2 - p1 < 0.95 {
                break (p1, p2);
            }
        };
        let burn_in = 50;
        let (mut prev1, mut prev2) = (0.0f64, 0.0f64);
        for t in 0..burn_in + t_len {
            let noise: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
            let x = phi1 * prev1 + phi2 * prev2 + 0.1 * noise;
            if t >= burn_in {
                data[[t - burn_in, d]] = x;
            }
            prev2 = prev1;
            prev1 = x;
        }
    }
    data
}

/// Corrupt every window with one contiguous anomalous segment.
///
/// Returns the corrupted windows and a 0/1 label per window (always 1 here;
/// callers mix the output with untouched normals to build labeled sets).
/// Segment placement, affected dimension, and signs are seeded.
pub fn synth_inject(
    windows: &[WindowTensor],
    kind: AnomalyKind,
    magnitude: f64,
    seed: u64,
) -> Result<(Vec<WindowTensor>, Vec<u8>)> {
    if !(magnitude > 0.0) {
        return Err(GeniasError::Param(format!(
            "magnitude must be > 0, got {magnitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(windows.len());
    let mut labels = Vec::with_capacity(windows.len());
    for w in windows {
        let t_len = w.window_len();
        let dims = w.dims();
        let min_len = (t_len / 10).max(2).min(t_len);
        let max_len = (t_len / 3).max(min_len).min(t_len);
        let seg_len = rng.gen_range(min_len..=max_len);
        let start = rng.gen_range(0..=t_len - seg_len);
        let dim = rng.gen_range(0..dims);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut data = w.data.clone();
        match kind {
            AnomalyKind::Spike => {
                // A few isolated extremes inside the segment.
                let n_spikes = (seg_len / 4).clamp(1, 5);
                let step = seg_len / n_spikes;
                for s in 0..n_spikes {
                    let t = start + s * step;
                    data[[t, dim]] += sign * magnitude;
                }
            }
            AnomalyKind::LevelShift => {
                for t in start..start + seg_len {
                    data[[t, dim]] += sign * magnitude;
                }
            }
            AnomalyKind::NoiseBurst => {
                for t in start..start + seg_len {
                    let noise: f64 =
                        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                    data[[t, dim]] += magnitude * noise;
                }
            }
        }
        out.push(WindowTensor {
            data,
            origin: w.origin.clone(),
            label: Some(true),
        });
        labels.push(1);
    }
    Ok((out, labels))
}
