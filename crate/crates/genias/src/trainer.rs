//! End-to-end training: batch sampling, forward pass through encoder,
//! reparameterized sampling, perturbed sampling, twin decoding, total loss,
//! and adaptive-moment updates for encoder, decoder, and the perturbation
//! scale. Deterministic given the seed; batches are drawn without
//! replacement and reshuffled each epoch.

use ndarray::{Array2, ArrayView2, Axis, s};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::GenConfig;
use crate::data::WindowTensor;
use crate::error::{GeniasError, Result};
use crate::model::{init_model, ModelParams, SIGMA_FLOOR};
use crate::nn::{clip_global_norm, standard_normal, Adam};
use crate::objectives::{total_loss, total_loss_grad, LossBreakdown, LossInputs};

const IMPROVEMENT_THRESHOLD: f64 = 1e-5;
const LR_PLATEAU_EPOCHS: usize = 25;
const LR_FLOOR: f64 = 1e-6;
const GRAD_CLIP_NORM: f64 = 5.0;

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub recon: f64,
    pub perturb: f64,
    pub zero_perturb: f64,
    pub en_kl: f64,
    pub total: f64,
    pub psi: f64,
}

impl EpochRecord {
    fn new(epoch: usize, lr: f64, losses: &LossBreakdown, psi: f64) -> Self {
        EpochRecord {
            epoch,
            lr,
            recon: losses.recon,
            perturb: losses.perturb,
            zero_perturb: losses.zero_perturb,
            en_kl: losses.en_kl,
            total: losses.total,
            psi,
        }
    }
}

pub struct TrainResult {
    pub model: ModelParams,
    pub history: Vec<EpochRecord>,
}

/// Halve the learning rate once the plateau counter reaches 25 epochs
/// without an improvement of at least 1e-5; floor at 1e-6.
pub fn lr_schedule(_epoch: usize, plateau_counter: usize, current_lr: f64) -> f64 {
    if plateau_counter >= LR_PLATEAU_EPOCHS {
        (current_lr / 2.0).max(LR_FLOOR)
    } else {
        current_lr
    }
}

/// Epochs elapsed since the running best improved by at least 1e-5.
fn epochs_since_improvement(totals: &[f64]) -> usize {
    let mut best = f64::INFINITY;
    let mut last_improvement = 0usize;
    for (i, &t) in totals.iter().enumerate() {
        if t < best - IMPROVEMENT_THRESHOLD || i == 0 {
            best = best.min(t);
            last_improvement = i;
        }
    }
    totals.len().saturating_sub(1) - last_improvement.min(totals.len().saturating_sub(1))
}

/// True once the best total loss has gone unimproved for `patience` epochs.
pub fn early_stop(history: &[LossBreakdown], patience: usize) -> bool {
    if history.len() <= patience {
        return false;
    }
    let totals: Vec<f64> = history.iter().map(|b| b.total).collect();
    epochs_since_improvement(&totals) >= patience
}

/// Train on normalized windows with default (no-op) observation.
pub fn train(windows: &[WindowTensor], config: &GenConfig, seed: u64) -> Result<TrainResult> {
    train_with_observer(windows, config, seed, |_, _| Ok(()))
}

/// Train, calling `observer` after every epoch with the record and current
/// parameters (for logging and periodic checkpoints).
pub fn train_with_observer(
    windows: &[WindowTensor],
    config: &GenConfig,
    seed: u64,
    mut observer: impl FnMut(&EpochRecord, &ModelParams) -> Result<()>,
) -> Result<TrainResult> {
    config.validate()?;
    if windows.is_empty() {
        return Err(GeniasError::Validation("training set is empty".into()));
    }
    let (t_len, dims) = (config.window_len, config.dims);
    for w in windows {
        if w.window_len() != t_len || w.dims() != dims {
            return Err(GeniasError::Shape {
                expected: format!("({t_len}, {dims})"),
                actual: format!("({}, {})", w.window_len(), w.dims()),
            });
        }
        if w.data.iter().any(|&v| !(-1e-6..=1.0 + 1e-6).contains(&v)) {
            return Err(GeniasError::Validation(format!(
                "window {}@{} is not normalized to [0, 1]",
                w.origin.0, w.origin.1
            )));
        }
    }

    let mut model = init_model(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let latent = model.latent;
    let mut optimizer = Adam::new(&model.param_shapes());

    let n = windows.len();
    let batch_size = config.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut lr = config.learning_rate;
    let mut history: Vec<EpochRecord> = Vec::new();
    let mut breakdowns: Vec<LossBreakdown> = Vec::new();
    // Plateau bookkeeping for the schedule: epochs since the last
    // improvement or learning-rate cut.
    let mut best_total = f64::INFINITY;
    let mut plateau = 0usize;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_losses = LossBreakdown {
            recon: 0.0,
            perturb: 0.0,
            zero_perturb: 0.0,
            en_kl: 0.0,
            total: 0.0,
        };
        let mut seen = 0usize;
        for chunk in order.chunks(batch_size) {
            let losses = train_step(&mut model, &mut optimizer, windows, chunk, config, lr, &mut rng)?;
            if let Some((component, value)) = losses.first_non_finite() {
                return Err(GeniasError::TrainingAbort {
                    epoch,
                    component: component.into(),
                    value,
                });
            }
            let w = chunk.len() as f64;
            epoch_losses.recon += losses.recon * w;
            epoch_losses.perturb += losses.perturb * w;
            epoch_losses.zero_perturb += losses.zero_perturb * w;
            epoch_losses.en_kl += losses.en_kl * w;
            epoch_losses.total += losses.total * w;
            seen += chunk.len();
        }
        let inv = 1.0 / seen as f64;
        epoch_losses.recon *= inv;
        epoch_losses.perturb *= inv;
        epoch_losses.zero_perturb *= inv;
        epoch_losses.en_kl *= inv;
        epoch_losses.total *= inv;

        breakdowns.push(epoch_losses);
        let record = EpochRecord::new(epoch, lr, &epoch_losses, model.psi.report_value());
        observer(&record, &model)?;
        history.push(record);

        if epoch_losses.total < best_total - IMPROVEMENT_THRESHOLD {
            best_total = epoch_losses.total;
            plateau = 0;
        } else {
            plateau += 1;
        }
        let new_lr = lr_schedule(epoch, plateau, lr);
        if new_lr != lr {
            lr = new_lr;
            plateau = 0;
        }
        if early_stop(&breakdowns, config.patience) {
            break;
        }
        let _ = latent;
    }
    Ok(TrainResult { model, history })
}

#[allow(clippy::too_many_arguments)]
fn train_step(
    model: &mut ModelParams,
    optimizer: &mut Adam,
    windows: &[WindowTensor],
    chunk: &[usize],
    config: &GenConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<LossBreakdown> {
    let b = chunk.len();
    let t_len = model.window_len;
    let dims = model.dims;
    let latent = model.latent;

    let mut xb = Array2::zeros((b * t_len, dims));
    for (i, &idx) in chunk.iter().enumerate() {
        xb.slice_mut(s![i * t_len..(i + 1) * t_len, ..])
            .assign(&windows[idx].data);
    }

    let dropout = model.arch.dropout;
    let (mu, logvar, enc_cache) = model.encode_pass(&xb.view(), b, dropout, rng);
    let sigma_raw = logvar.mapv(|v| (0.5 * v).exp());
    let sigma = sigma_raw.mapv(|s| s.max(SIGMA_FLOOR));

    let eps1 = standard_normal(rng, b, latent);
    let eps2 = standard_normal(rng, b, latent);
    let psi_row = model.psi.broadcast(latent);
    let z = &mu + &(&sigma * &eps1);
    let scaled_noise = &sigma * &eps2; // sigma .* eps2, reused for the psi gradient
    let z_tilde = &mu + &(&scaled_noise * &psi_row);

    let (yhat, dec_cache_hat) = model.decode_pass(&z.view(), dropout, rng);
    let (ytilde, dec_cache_tilde) = model.decode_pass(&z_tilde.view(), dropout, rng);

    let x_views: Vec<ArrayView2<f64>> = (0..b)
        .map(|i| xb.slice(s![i * t_len..(i + 1) * t_len, ..]))
        .collect();
    let xhat_views: Vec<ArrayView2<f64>> = (0..b)
        .map(|i| yhat.slice(s![i * t_len..(i + 1) * t_len, ..]))
        .collect();
    let xtilde_views: Vec<ArrayView2<f64>> = (0..b)
        .map(|i| ytilde.slice(s![i * t_len..(i + 1) * t_len, ..]))
        .collect();

    let inputs = LossInputs {
        xs: &x_views,
        xhats: &xhat_views,
        xtildes: &xtilde_views,
        mu: mu.view(),
        sigma: sigma.view(),
    };
    let losses = total_loss(&inputs, config)?;
    let grads = total_loss_grad(&inputs, config)?;

    let mut dyhat = Array2::zeros((b * t_len, dims));
    let mut dytilde = Array2::zeros((b * t_len, dims));
    for i in 0..b {
        dyhat
            .slice_mut(s![i * t_len..(i + 1) * t_len, ..])
            .assign(&grads.dxhat[i]);
        dytilde
            .slice_mut(s![i * t_len..(i + 1) * t_len, ..])
            .assign(&grads.dxtilde[i]);
    }
    let (dz_hat, dec_grads_hat) = model.decoder_backward(&dec_cache_hat, &dyhat.view());
    let (dz_tilde, dec_grads_tilde) = model.decoder_backward(&dec_cache_tilde, &dytilde.view());
    let dec_grads: Vec<Array2<f64>> = dec_grads_hat
        .into_iter()
        .zip(dec_grads_tilde)
        .map(|(a, b)| a + b)
        .collect();

    // Reparameterization backward:
    //   z      = mu + sigma .* eps1
    //   ztilde = mu + psi .* sigma .* eps2
    let dmu = &grads.dmu + &dz_hat + &dz_tilde;
    let dsigma = &grads.dsigma + &(&dz_hat * &eps1) + &(&(&dz_tilde * &eps2) * &psi_row);
    let dpsi_per_dim = (&dz_tilde * &scaled_noise).sum_axis(Axis(0));
    let dpsi = if model.psi.rho.ncols() == 1 {
        Array2::from_elem((1, 1), dpsi_per_dim.sum())
    } else {
        dpsi_per_dim.insert_axis(Axis(0))
    };
    let drho = dpsi * model.psi.constraint_grad();

    // Through the sigma floor: clamped entries stop the gradient.
    let mut dlogvar = &dsigma * &sigma_raw * 0.5;
    dlogvar.zip_mut_with(&sigma_raw, |g, &s| {
        if s < SIGMA_FLOOR {
            *g = 0.0;
        }
    });

    let enc_grads = model.encoder_backward(&enc_cache, &dmu.view(), &dlogvar.view());

    let mut all_grads = enc_grads;
    all_grads.extend(dec_grads);
    all_grads.push(drho);
    clip_global_norm(&mut all_grads, GRAD_CLIP_NORM);

    let mut params = model.param_refs_mut();
    optimizer.step(&mut params, &all_grads, lr);
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ArchDescriptor;
    use crate::data::{apply_normalizer, fit_normalizer, synth_normal, SynthKind};

    fn tiny_config(latent: usize) -> GenConfig {
        let mut c = GenConfig::for_dims(1);
        c.window_len = 8;
        c.latent = Some(latent);
        c.batch_size = 16;
        c.arch = ArchDescriptor {
            channels: vec![3, 4],
            dilations: vec![1, 2],
            kernel_size: 3,
            dropout: 0.0,
        };
        c
    }

    fn normalized_corpus(count: usize, t_len: usize) -> Vec<WindowTensor> {
        let raw = synth_normal(SynthKind::SineMix, t_len, 1, count, 5).unwrap();
        let stats = fit_normalizer(&raw).unwrap();
        apply_normalizer(&raw, &stats).unwrap()
    }

    #[test]
    fn lr_schedule_rules() {
        assert_eq!(lr_schedule(10, 0, 1e-4), 1e-4);
        assert_eq!(lr_schedule(10, 24, 1e-4), 1e-4);
        assert_eq!(lr_schedule(10, 25, 1e-4), 5e-5);
        assert_eq!(lr_schedule(10, 25, 1.5e-6), 1e-6);
        assert_eq!(lr_schedule(10, 30, 1e-6), 1e-6);
    }

    #[test]
    fn early_stop_rules() {
        let mk = |totals: &[f64]| -> Vec<LossBreakdown> {
            totals
                .iter()
                .map(|&t| LossBreakdown {
                    recon: 0.0,
                    perturb: 0.0,
                    zero_perturb: 0.0,
                    en_kl: 0.0,
                    total: t,
                })
                .collect()
        };
        // Strictly decreasing: never stops.
        let dec: Vec<f64> = (0..150).map(|i| 10.0 - i as f64 * 0.01).collect();
        assert!(!early_stop(&mk(&dec), 100));
        // Flat history of length 101 stops at patience 100.
        assert!(early_stop(&mk(&vec![1.0; 101]), 100));
        // Shorter than patience never stops.
        assert!(!early_stop(&mk(&vec![1.0; 99]), 100));
    }

    #[test]
    fn empty_dataset_rejected() {
        let c = tiny_config(4);
        assert!(matches!(train(&[], &c, 0), Err(GeniasError::Validation(_))));
    }

    #[test]
    fn unnormalized_windows_rejected() {
        let c = tiny_config(4);
        let w = WindowTensor::new(
            Array2::from_elem((8, 1), 5.0),
            ("raw".into(), 0),
            None,
        )
        .unwrap();
        assert!(train(&[w], &c, 0).is_err());
    }

    #[test]
    fn kl_only_training_drives_sigma_to_prior() {
        // With alpha = beta = gamma = 0 and zeta = 1, the objective reduces
        // to the latent regularizer whose optimum is sigma = sigma_prior.
        let mut c = tiny_config(4);
        c.alpha = 0.0;
        c.beta = 0.0;
        c.gamma = Some(0.0);
        c.zeta = 1.0;
        c.sigma_prior = 0.5;
        c.learning_rate = 2e-2;
        c.max_epochs = 500;
        c.patience = 500;
        let windows = normalized_corpus(16, 8);
        let result = train(&windows, &c, 3).unwrap();
        for w in &windows {
            let lat = result.model.encode(&w.data.view()).unwrap();
            for &s in lat.sigma.iter() {
                assert!(
                    (s - 0.5).abs() < 1e-2,
                    "posterior sigma {s} should be near 0.5"
                );
            }
        }
    }

    #[test]
    fn loss_decreases_on_sine_corpus() {
        let mut c = tiny_config(6);
        c.learning_rate = 5e-3;
        c.max_epochs = 100;
        c.patience = 200;
        let windows = normalized_corpus(32, 8);
        let result = train(&windows, &c, 11).unwrap();
        let first = result.history.first().unwrap().total;
        let last = result.history.last().unwrap().total;
        assert!(last < first, "total loss should decrease: {first} -> {last}");
    }

    #[test]
    fn training_is_deterministic() {
        let mut c = tiny_config(4);
        c.max_epochs = 12;
        let windows = normalized_corpus(20, 8);
        let a = train(&windows, &c, 7).unwrap();
        let b = train(&windows, &c, 7).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        let other = train(&windows, &c, 8).unwrap();
        assert_ne!(a.model, other.model);
    }

    #[test]
    fn psi_moves_only_through_active_perturbation_loss() {
        let windows = normalized_corpus(16, 8);

        // beta = 0: no path from the loss to psi.
        let mut frozen = tiny_config(4);
        frozen.beta = 0.0;
        frozen.max_epochs = 5;
        let r = train(&windows, &frozen, 2).unwrap();
        let psi0 = crate::model::PerturbationScale::init(false, 4).value()[0];
        assert!((r.model.perturbation().value()[0] - psi0).abs() < 1e-12);

        // beta > 0 with margins that keep a hinge active: psi updates.
        let mut live = tiny_config(4);
        live.beta = 0.1;
        live.delta_min = 0.4;
        live.delta_max = 0.5;
        live.max_epochs = 5;
        let r2 = train(&windows, &live, 2).unwrap();
        assert!((r2.model.perturbation().value()[0] - psi0).abs() > 1e-9);
    }

    #[test]
    fn per_dimension_psi_trains() {
        let mut c = tiny_config(4);
        c.psi_per_dim = true;
        c.beta = 0.2;
        c.delta_min = 0.4;
        c.delta_max = 0.5;
        c.max_epochs = 8;
        let windows = normalized_corpus(16, 8);
        let r = train(&windows, &c, 4).unwrap();
        let psi = r.model.perturbation().value();
        assert_eq!(psi.len(), 4);
        assert!(psi.iter().all(|&p| p > 1.0));
        // The vector entries receive independent gradients.
        let spread = psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - psi.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread > 0.0);
    }

    #[test]
    fn history_serialization_round_trips() {
        let mut c = tiny_config(4);
        c.max_epochs = 4;
        let windows = normalized_corpus(12, 8);
        let result = train(&windows, &c, 1).unwrap();
        for rec in &result.history {
            let line = serde_json::to_string(rec).unwrap();
            let back: EpochRecord = serde_json::from_str(&line).unwrap();
            assert_eq!(*rec, back);
        }
    }

    #[test]
    fn exploding_lr_aborts_with_component_name() {
        let mut c = tiny_config(4);
        c.learning_rate = 1e200;
        c.max_epochs = 60;
        let windows = normalized_corpus(16, 8);
        match train(&windows, &c, 0) {
            Err(GeniasError::TrainingAbort { component, .. }) => {
                assert!(!component.is_empty());
            }
            Ok(_) => panic!("expected training to abort with non-finite loss"),
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }
}
