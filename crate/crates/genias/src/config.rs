//! Run configuration: loss weights, margins, architecture sizes, patching.
//!
//! Defaults follow the reference hyperparameter table: window length 200,
//! latent size 50 for univariate / 100 for multivariate input, lr 1e-4 with
//! scheduled reduction, at most 1000 epochs, kernel size 3, dropout 0.1,
//! batch size 100, weights alpha=1.0, beta=0.1, gamma=0 (D=1) or 0.01 (D>1),
//! zeta=0.1, prior standard deviation 0.5, and margins (0.1, 0.2).

use serde::{Deserialize, Serialize};

use crate::error::{GeniasError, Result};

/// Shape of the encoder/decoder stacks. The decoder mirrors the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchDescriptor {
    /// Per-block output channels of the encoder convolutions (input is D).
    pub channels: Vec<usize>,
    /// Per-block dilation factors; must match `channels` in length.
    pub dilations: Vec<usize>,
    pub kernel_size: usize,
    pub dropout: f64,
}

impl Default for ArchDescriptor {
    fn default() -> Self {
        ArchDescriptor {
            channels: vec![32, 64, 64],
            dilations: vec![1, 2, 4],
            kernel_size: 3,
            dropout: 0.1,
        }
    }
}

impl ArchDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.len() != self.dilations.len() {
            return Err(GeniasError::Config(format!(
                "architecture needs matching non-empty channels/dilations, got {}/{}",
                self.channels.len(),
                self.dilations.len()
            )));
        }
        if self.kernel_size == 0 || self.channels.iter().any(|&c| c == 0) {
            return Err(GeniasError::Config(
                "kernel size and channel counts must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(GeniasError::Config(format!(
                "dropout must lie in [0,1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// All training hyperparameters for the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    /// Window length T.
    pub window_len: usize,
    /// Input dimensions D.
    pub dims: usize,
    /// Latent size L; `None` picks 50 for D=1 and 100 for D>1.
    pub latent: Option<usize>,
    /// Loss weights.
    pub alpha: f64,
    pub beta: f64,
    /// `None` picks 0.0 for D=1 and 0.01 for D>1.
    pub gamma: Option<f64>,
    pub zeta: f64,
    /// Margins of the perturbation loss, 0 < delta_min < delta_max.
    pub delta_min: f64,
    pub delta_max: f64,
    /// Prior standard deviation of the latent regularizer, in (0, 1].
    pub sigma_prior: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Early-stop patience in epochs (improvement threshold 1e-5).
    pub patience: usize,
    /// Use the exact closed-form Gaussian KL instead of the default
    /// regularizer form.
    pub exact_kl: bool,
    /// Learn one perturbation scale per latent dimension instead of a
    /// single shared scalar.
    pub psi_per_dim: bool,
    pub arch: ArchDescriptor,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            window_len: 200,
            dims: 1,
            latent: None,
            alpha: 1.0,
            beta: 0.1,
            gamma: None,
            zeta: 0.1,
            delta_min: 0.1,
            delta_max: 0.2,
            sigma_prior: 0.5,
            batch_size: 100,
            learning_rate: 1e-4,
            max_epochs: 1000,
            patience: 100,
            exact_kl: false,
            psi_per_dim: false,
            arch: ArchDescriptor::default(),
        }
    }
}

impl GenConfig {
    pub fn for_dims(dims: usize) -> Self {
        GenConfig {
            dims,
            ..GenConfig::default()
        }
    }

    /// Latent size with the dimension-dependent default applied.
    pub fn latent_size(&self) -> usize {
        self.latent.unwrap_or(if self.dims == 1 { 50 } else { 100 })
    }

    /// Zero-perturbation weight with the dimension-dependent default applied.
    pub fn gamma_value(&self) -> f64 {
        self.gamma.unwrap_or(if self.dims == 1 { 0.0 } else { 0.01 })
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.window_len == 0 || self.dims == 0 || self.latent_size() == 0 {
            return Err(GeniasError::Config(
                "window length, dims and latent size must be positive".into(),
            ));
        }
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma_value() < 0.0 || self.zeta < 0.0 {
            return Err(GeniasError::Config("loss weights must be nonnegative".into()));
        }
        if !(self.delta_min > 0.0 && self.delta_min < self.delta_max) {
            return Err(GeniasError::Config(format!(
                "margins must satisfy 0 < delta_min < delta_max, got ({}, {})",
                self.delta_min, self.delta_max
            )));
        }
        if !(self.sigma_prior > 0.0 && self.sigma_prior <= 1.0) {
            return Err(GeniasError::Config(format!(
                "sigma_prior must lie in (0, 1], got {}",
                self.sigma_prior
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(GeniasError::Config(
                "batch size and max epochs must be positive".into(),
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(GeniasError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// How generated anomalies are composed back into the source window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchMode {
    /// Replace cells whose squared deviation exceeds tau times the
    /// per-dimension amplitude.
    Deviation,
    /// Replace one contiguous time span covering a fixed portion of T.
    Length,
    /// No patching; the generated window is returned whole.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatchConfig {
    pub mode: PatchMode,
    /// Deviation threshold scaling factor.
    pub tau: f64,
    /// Patch fraction of T for length mode, in (0, 1].
    pub portion: f64,
    /// Compare deviations aggregated per dimension instead of per cell.
    pub per_dimension: bool,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            mode: PatchMode::Deviation,
            tau: 0.2,
            portion: 0.5,
            per_dimension: false,
        }
    }
}

impl PatchConfig {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            PatchMode::Deviation => {
                if !(self.tau >= 0.0 && self.tau.is_finite()) {
                    return Err(GeniasError::Param(format!(
                        "deviation patching requires tau >= 0, got {}",
                        self.tau
                    )));
                }
            }
            PatchMode::Length => {
                if !(self.portion > 0.0 && self.portion <= 1.0) {
                    return Err(GeniasError::Param(format!(
                        "length patching requires portion in (0, 1], got {}",
                        self.portion
                    )));
                }
            }
            PatchMode::None => {}
        }
        Ok(())
    }
}
