//! Training losses: reconstruction, perturbation (triplet + regularizer),
//! zero-perturbation, and the latent regularizer, plus their weighted total.
//!
//! Every loss has a value function and an analytic-gradient companion used
//! by the trainer; the gradients are checked against central finite
//! differences in the test suite.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::config::GenConfig;
use crate::error::{GeniasError, Result};
use crate::model::LatentGaussian;

/// Unweighted per-component losses and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub perturb: f64,
    pub zero_perturb: f64,
    pub en_kl: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// Weighted combination of the four components.
    pub fn combine(
        recon: f64,
        perturb: f64,
        zero_perturb: f64,
        en_kl: f64,
        config: &GenConfig,
    ) -> Self {
        let total = config.alpha * recon
            + config.beta * perturb
            + config.gamma_value() * zero_perturb
            + config.zeta * en_kl;
        LossBreakdown {
            recon,
            perturb,
            zero_perturb,
            en_kl,
            total,
        }
    }

    /// Name and value of the first non-finite component, if any.
    pub fn first_non_finite(&self) -> Option<(&'static str, f64)> {
        [
            ("recon", self.recon),
            ("perturb", self.perturb),
            ("zero_perturb", self.zero_perturb),
            ("en_kl", self.en_kl),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
    }
}

fn check_same_shape(x: &ArrayView2<f64>, y: &ArrayView2<f64>) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(GeniasError::Shape {
            expected: format!("{:?}", x.shape()),
            actual: format!("{:?}", y.shape()),
        });
    }
    Ok(())
}

/// Mean over all T*D cells of the squared difference.
pub fn mse_distance(x: &ArrayView2<f64>, y: &ArrayView2<f64>) -> Result<f64> {
    check_same_shape(x, y)?;
    let n = x.len() as f64;
    let sum: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / n)
}

/// Mean over the batch of the per-window MSE.
pub fn recon_loss(xs: &[ArrayView2<f64>], xhats: &[ArrayView2<f64>]) -> Result<f64> {
    if xs.is_empty() || xs.len() != xhats.len() {
        return Err(GeniasError::Param(format!(
            "reconstruction loss needs matching non-empty batches, got {}/{}",
            xs.len(),
            xhats.len()
        )));
    }
    let mut acc = 0.0;
    for (x, xh) in xs.iter().zip(xhats) {
        acc += mse_distance(x, xh)?;
    }
    Ok(acc / xs.len() as f64)
}

/// Gradient of [`recon_loss`] with respect to each reconstruction.
pub fn recon_loss_grad(xs: &[ArrayView2<f64>], xhats: &[ArrayView2<f64>]) -> Result<Vec<Array2<f64>>> {
    let b = xs.len() as f64;
    xs.iter()
        .zip(xhats)
        .map(|(x, xh)| {
            check_same_shape(x, xh)?;
            let n = x.len() as f64;
            Ok((&xh.to_owned() - x) * (2.0 / (n * b)))
        })
        .collect()
}

/// Triplet hinge plus realism regularizer.
///
/// Mean over the batch of max(d(X, Xhat) - d(X, Xtilde) + delta_min, 0),
/// plus mean over the batch of max(d(X, Xtilde) - delta_max, 0).
pub fn perturb_loss(
    xs: &[ArrayView2<f64>],
    xhats: &[ArrayView2<f64>],
    xtildes: &[ArrayView2<f64>],
    delta_min: f64,
    delta_max: f64,
) -> Result<f64> {
    check_margins(delta_min, delta_max)?;
    if xs.is_empty() || xs.len() != xhats.len() || xs.len() != xtildes.len() {
        return Err(GeniasError::Param("perturbation loss needs matching non-empty batches".into()));
    }
    let b = xs.len() as f64;
    let mut acc = 0.0;
    for ((x, xh), xt) in xs.iter().zip(xhats).zip(xtildes) {
        let d_hat = mse_distance(x, xh)?;
        let d_tilde = mse_distance(x, xt)?;
        acc += (d_hat - d_tilde + delta_min).max(0.0);
        acc += (d_tilde - delta_max).max(0.0);
    }
    Ok(acc / b)
}

/// Gradients of [`perturb_loss`] with respect to reconstructions and
/// generated windows.
pub fn perturb_loss_grad(
    xs: &[ArrayView2<f64>],
    xhats: &[ArrayView2<f64>],
    xtildes: &[ArrayView2<f64>],
    delta_min: f64,
    delta_max: f64,
) -> Result<(Vec<Array2<f64>>, Vec<Array2<f64>>)> {
    check_margins(delta_min, delta_max)?;
    let b = xs.len() as f64;
    let mut dhats = Vec::with_capacity(xs.len());
    let mut dtildes = Vec::with_capacity(xs.len());
    for ((x, xh), xt) in xs.iter().zip(xhats).zip(xtildes) {
        let n = x.len() as f64;
        let d_hat = mse_distance(x, xh)?;
        let d_tilde = mse_distance(x, xt)?;
        let mut dh = Array2::zeros(x.raw_dim());
        let mut dt = Array2::zeros(x.raw_dim());
        if d_hat - d_tilde + delta_min > 0.0 {
            dh = (&xh.to_owned() - x) * (2.0 / (n * b));
            dt = (&xt.to_owned() - x) * (-2.0 / (n * b));
        }
        if d_tilde - delta_max > 0.0 {
            dt = dt + (&xt.to_owned() - x) * (2.0 / (n * b));
        }
        dhats.push(dh);
        dtildes.push(dt);
    }
    Ok((dhats, dtildes))
}

fn check_margins(delta_min: f64, delta_max: f64) -> Result<()> {
    if !(delta_min > 0.0 && delta_min < delta_max) {
        return Err(GeniasError::Param(format!(
            "margins must satisfy 0 < delta_min < delta_max, got ({delta_min}, {delta_max})"
        )));
    }
    Ok(())
}

/// Indices of dimensions of `x` that are identically zero.
fn zero_dim_set(x: &ArrayView2<f64>) -> Vec<usize> {
    (0..x.ncols())
        .filter(|&d| x.column(d).iter().all(|&v| v == 0.0))
        .collect()
}

/// Inverse-deviation penalty on identically-zero dimensions of the input.
///
/// Windows without zero dimensions contribute nothing and are excluded from
/// the average; the loss is 0 when no window has a zero dimension.
pub fn zero_perturb_loss(xs: &[ArrayView2<f64>], xtildes: &[ArrayView2<f64>]) -> Result<f64> {
    if xs.len() != xtildes.len() {
        return Err(GeniasError::Param("zero-perturbation loss needs matching batches".into()));
    }
    let mut acc = 0.0;
    let mut contributing = 0usize;
    for (x, xt) in xs.iter().zip(xtildes) {
        check_same_shape(x, xt)?;
        let zset = zero_dim_set(x);
        if zset.is_empty() {
            continue;
        }
        let t_len = x.nrows() as f64;
        let mut s = 0.0;
        for &d in &zset {
            for t in 0..x.nrows() {
                let dev = xt[[t, d]] - x[[t, d]];
                s += 1.0 / (dev * dev + 1.0);
            }
        }
        acc += s / (t_len * zset.len() as f64);
        contributing += 1;
    }
    if contributing == 0 {
        Ok(0.0)
    } else {
        Ok(acc / contributing as f64)
    }
}

/// Gradient of [`zero_perturb_loss`] with respect to the generated windows.
pub fn zero_perturb_loss_grad(
    xs: &[ArrayView2<f64>],
    xtildes: &[ArrayView2<f64>],
) -> Result<Vec<Array2<f64>>> {
    let zsets: Vec<Vec<usize>> = xs.iter().map(zero_dim_set).collect();
    let contributing = zsets.iter().filter(|z| !z.is_empty()).count();
    let mut grads = Vec::with_capacity(xs.len());
    for ((x, xt), zset) in xs.iter().zip(xtildes).zip(&zsets) {
        check_same_shape(x, xt)?;
        let mut g = Array2::zeros(x.raw_dim());
        if !zset.is_empty() {
            let scale = 1.0 / (x.nrows() as f64 * zset.len() as f64 * contributing as f64);
            for &d in zset {
                for t in 0..x.nrows() {
                    let dev = xt[[t, d]] - x[[t, d]];
                    let denom = dev * dev + 1.0;
                    g[[t, d]] = -2.0 * dev / (denom * denom) * scale;
                }
            }
        }
        grads.push(g);
    }
    Ok(grads)
}

fn check_prior(sigma_prior: f64) -> Result<()> {
    if !(sigma_prior > 0.0) {
        return Err(GeniasError::Param(format!(
            "sigma_prior must be > 0, got {sigma_prior}"
        )));
    }
    Ok(())
}

/// Latent regularizer, batch-averaged:
/// -1/2 sum_j [1 + log s2 - mu^2 - s2/s2_prior + 2 log sigma_prior].
pub fn enhanced_kl_matrix(mu: &ArrayView2<f64>, sigma: &ArrayView2<f64>, sigma_prior: f64) -> Result<f64> {
    check_prior(sigma_prior)?;
    check_same_shape(mu, sigma)?;
    let b = mu.nrows() as f64;
    let sp2 = sigma_prior * sigma_prior;
    let two_log_sp = 2.0 * sigma_prior.ln();
    let mut acc = 0.0;
    for (m, s) in mu.iter().zip(sigma.iter()) {
        let s2 = s * s;
        acc += 1.0 + s2.ln() - m * m - s2 / sp2 + two_log_sp;
    }
    Ok(-0.5 * acc / b)
}

/// Gradients of [`enhanced_kl_matrix`] with respect to mu and sigma.
pub fn enhanced_kl_grad_matrix(
    mu: &ArrayView2<f64>,
    sigma: &ArrayView2<f64>,
    sigma_prior: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_prior(sigma_prior)?;
    check_same_shape(mu, sigma)?;
    let b = mu.nrows() as f64;
    let sp2 = sigma_prior * sigma_prior;
    let dmu = mu.mapv(|m| m / b);
    let dsigma = sigma.mapv(|s| (-1.0 / s + s / sp2) / b);
    Ok((dmu, dsigma))
}

/// Exact closed-form Gaussian KL to N(0, sigma_prior^2 I), batch-averaged.
pub fn exact_kl_matrix(mu: &ArrayView2<f64>, sigma: &ArrayView2<f64>, sigma_prior: f64) -> Result<f64> {
    check_prior(sigma_prior)?;
    check_same_shape(mu, sigma)?;
    let b = mu.nrows() as f64;
    let sp2 = sigma_prior * sigma_prior;
    let mut acc = 0.0;
    for (m, s) in mu.iter().zip(sigma.iter()) {
        let ratio = s * s / sp2;
        acc += 0.5 * (ratio + m * m / sp2 - 1.0 - ratio.ln());
    }
    Ok(acc / b)
}

/// Gradients of [`exact_kl_matrix`] with respect to mu and sigma.
pub fn exact_kl_grad_matrix(
    mu: &ArrayView2<f64>,
    sigma: &ArrayView2<f64>,
    sigma_prior: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_prior(sigma_prior)?;
    check_same_shape(mu, sigma)?;
    let b = mu.nrows() as f64;
    let sp2 = sigma_prior * sigma_prior;
    let dmu = mu.mapv(|m| m / sp2 / b);
    let dsigma = sigma.mapv(|s| (s / sp2 - 1.0 / s) / b);
    Ok((dmu, dsigma))
}

fn latent_matrices(batch: &[LatentGaussian]) -> Result<(Array2<f64>, Array2<f64>)> {
    let first = batch
        .first()
        .ok_or_else(|| GeniasError::Param("empty latent batch".into()))?;
    let l = first.mu.len();
    let mut mu = Array2::zeros((batch.len(), l));
    let mut sigma = Array2::zeros((batch.len(), l));
    for (i, lat) in batch.iter().enumerate() {
        if lat.mu.len() != l || lat.sigma.len() != l {
            return Err(GeniasError::Shape {
                expected: format!("latent size {l}"),
                actual: format!("{}/{}", lat.mu.len(), lat.sigma.len()),
            });
        }
        mu.row_mut(i).assign(&lat.mu);
        sigma.row_mut(i).assign(&lat.sigma);
    }
    Ok((mu, sigma))
}

/// [`enhanced_kl_matrix`] over a slice of latent posteriors.
pub fn enhanced_kl_loss(batch: &[LatentGaussian], sigma_prior: f64) -> Result<f64> {
    let (mu, sigma) = latent_matrices(batch)?;
    enhanced_kl_matrix(&mu.view(), &sigma.view(), sigma_prior)
}

/// [`exact_kl_matrix`] over a slice of latent posteriors.
pub fn exact_kl_loss(batch: &[LatentGaussian], sigma_prior: f64) -> Result<f64> {
    let (mu, sigma) = latent_matrices(batch)?;
    exact_kl_matrix(&mu.view(), &sigma.view(), sigma_prior)
}

/// Everything the total loss depends on.
pub struct LossInputs<'a> {
    pub xs: &'a [ArrayView2<'a, f64>],
    pub xhats: &'a [ArrayView2<'a, f64>],
    pub xtildes: &'a [ArrayView2<'a, f64>],
    /// Posterior means, shape (B, L).
    pub mu: ArrayView2<'a, f64>,
    /// Posterior standard deviations, shape (B, L).
    pub sigma: ArrayView2<'a, f64>,
}

/// Weighted total of the four losses.
pub fn total_loss(inputs: &LossInputs<'_>, config: &GenConfig) -> Result<LossBreakdown> {
    let recon = recon_loss(inputs.xs, inputs.xhats)?;
    let perturb = perturb_loss(
        inputs.xs,
        inputs.xhats,
        inputs.xtildes,
        config.delta_min,
        config.delta_max,
    )?;
    let zero_perturb = zero_perturb_loss(inputs.xs, inputs.xtildes)?;
    let en_kl = if config.exact_kl {
        exact_kl_matrix(&inputs.mu, &inputs.sigma, config.sigma_prior)?
    } else {
        enhanced_kl_matrix(&inputs.mu, &inputs.sigma, config.sigma_prior)?
    };
    Ok(LossBreakdown::combine(recon, perturb, zero_perturb, en_kl, config))
}

/// Gradients of the weighted total with respect to the decoder outputs and
/// the latent parameters.
pub struct TotalLossGrads {
    pub dxhat: Vec<Array2<f64>>,
    pub dxtilde: Vec<Array2<f64>>,
    pub dmu: Array2<f64>,
    pub dsigma: Array2<f64>,
}

pub fn total_loss_grad(inputs: &LossInputs<'_>, config: &GenConfig) -> Result<TotalLossGrads> {
    let drecon = recon_loss_grad(inputs.xs, inputs.xhats)?;
    let (dp_hat, dp_tilde) = perturb_loss_grad(
        inputs.xs,
        inputs.xhats,
        inputs.xtildes,
        config.delta_min,
        config.delta_max,
    )?;
    let dzp = zero_perturb_loss_grad(inputs.xs, inputs.xtildes)?;
    let (dmu, dsigma) = if config.exact_kl {
        exact_kl_grad_matrix(&inputs.mu, &inputs.sigma, config.sigma_prior)?
    } else {
        enhanced_kl_grad_matrix(&inputs.mu, &inputs.sigma, config.sigma_prior)?
    };
    let gamma = config.gamma_value();
    let dxhat = drecon
        .into_iter()
        .zip(dp_hat)
        .map(|(r, p)| r * config.alpha + p * config.beta)
        .collect();
    let dxtilde = dp_tilde
        .into_iter()
        .zip(dzp)
        .map(|(p, z)| p * config.beta + z * gamma)
        .collect();
    Ok(TotalLossGrads {
        dxhat,
        dxtilde,
        dmu: dmu * config.zeta,
        dsigma: dsigma * config.zeta,
    })
}
