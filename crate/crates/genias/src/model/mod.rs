//! The generator: a dilated-convolution encoder producing a diagonal
//! Gaussian posterior, a latent sampler with a learned perturbation scale,
//! and a mirrored transpose-convolution decoder.

mod checkpoint;

pub use checkpoint::{file_sha256, load_checkpoint, save_checkpoint};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ArchDescriptor, GenConfig};
use crate::data::NormStats;
use crate::error::{GeniasError, Result};
use crate::nn::{
    dropout_backward, dropout_forward, relu_backward, relu_forward, standard_normal, Conv1d,
    ConvDirection, Dense,
};

/// Standard deviations are clamped below at this floor.
pub const SIGMA_FLOOR: f64 = 1e-4;

/// Per-window posterior parameters (mean and standard deviation).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGaussian {
    pub mu: Array1<f64>,
    pub sigma: Array1<f64>,
}

impl LatentGaussian {
    pub fn new(mu: Array1<f64>, sigma: Array1<f64>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(GeniasError::Shape {
                expected: format!("sigma of length {}", mu.len()),
                actual: format!("length {}", sigma.len()),
            });
        }
        if mu.iter().any(|v| !v.is_finite()) || sigma.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(GeniasError::Validation(
                "latent parameters must be finite with sigma > 0".into(),
            ));
        }
        Ok(LatentGaussian { mu, sigma })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Learned inflation factor, kept above 1 through 1 + softplus of an
/// unconstrained parameter. Either a single scalar or one entry per
/// latent dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationScale {
    /// (1, 1) or (1, L).
    pub(crate) rho: Array2<f64>,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl PerturbationScale {
    pub(crate) fn init(per_dim: bool, latent: usize) -> Self {
        // Constrained value starts at 2.0: softplus(rho) = 1.
        let rho0 = (std::f64::consts::E - 1.0).ln();
        let n = if per_dim { latent } else { 1 };
        PerturbationScale {
            rho: Array2::from_elem((1, n), rho0),
        }
    }

    /// Build from target constrained values; values at or below 1 clamp the
    /// underlying parameter so the scale degenerates to exactly 1.0.
    pub fn from_psi(values: &[f64]) -> Self {
        let rho = values
            .iter()
            .map(|&p| {
                let excess = p - 1.0;
                if excess <= 1e-300 {
                    -745.0
                } else {
                    // Inverse softplus.
                    (excess.exp() - 1.0).ln()
                }
            })
            .collect::<Vec<_>>();
        PerturbationScale {
            rho: Array2::from_shape_vec((1, values.len()), rho).unwrap(),
        }
    }

    /// Constrained values, 1 + softplus(rho).
    pub fn value(&self) -> Array1<f64> {
        self.rho.row(0).mapv(|r| 1.0 + softplus(r))
    }

    /// Constrained value broadcast to the latent size.
    pub fn broadcast(&self, latent: usize) -> Array1<f64> {
        let v = self.value();
        if v.len() == latent {
            v
        } else {
            Array1::from_elem(latent, v[0])
        }
    }

    /// Mean constrained value, for logs and reports.
    pub fn report_value(&self) -> f64 {
        let v = self.value();
        v.sum() / v.len() as f64
    }

    /// d psi / d rho, elementwise sigmoid.
    pub(crate) fn constraint_grad(&self) -> Array2<f64> {
        self.rho.mapv(|r| 1.0 / (1.0 + (-r).exp()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Encoder {
    pub convs: Vec<Conv1d>,
    pub mu_head: Dense,
    pub logvar_head: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Decoder {
    pub fc: Dense,
    pub convs: Vec<Conv1d>,
}

/// Full parameter set plus the normalization stats the model was trained
/// with (carried so downstream injection runs in the same space).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub window_len: usize,
    pub dims: usize,
    pub latent: usize,
    pub psi_per_dim: bool,
    pub arch: ArchDescriptor,
    pub(crate) enc: Encoder,
    pub(crate) dec: Decoder,
    pub(crate) psi: PerturbationScale,
    pub norm: Option<NormStats>,
}

/// Deterministically initialize a model from the config and seed.
pub fn init_model(config: &GenConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t_len, dims, latent) = (config.window_len, config.dims, config.latent_size());
    let arch = config.arch.clone();
    let k = arch.kernel_size;

    let mut enc_convs = Vec::with_capacity(arch.channels.len());
    let mut c_in = dims;
    for (&c_out, &dil) in arch.channels.iter().zip(&arch.dilations) {
        enc_convs.push(Conv1d::new(&mut rng, c_in, c_out, k, dil, ConvDirection::Causal));
        c_in = c_out;
    }
    let c_last = *arch.channels.last().unwrap();
    let flat = t_len * c_last;
    let enc = Encoder {
        convs: enc_convs,
        mu_head: Dense::new(&mut rng, flat, latent),
        logvar_head: Dense::new(&mut rng, flat, latent),
    };

    let mut dec_convs = Vec::with_capacity(arch.channels.len());
    let mut c_in = c_last;
    for i in (0..arch.channels.len()).rev() {
        let c_out = if i == 0 { dims } else { arch.channels[i - 1] };
        dec_convs.push(Conv1d::new(
            &mut rng,
            c_in,
            c_out,
            k,
            arch.dilations[i],
            ConvDirection::Anticausal,
        ));
        c_in = c_out;
    }
    let dec = Decoder {
        fc: Dense::new(&mut rng, latent, flat),
        convs: dec_convs,
    };

    Ok(ModelParams {
        window_len: t_len,
        dims,
        latent,
        psi_per_dim: config.psi_per_dim,
        arch,
        enc,
        dec,
        psi: PerturbationScale::init(config.psi_per_dim, latent),
        norm: None,
    })
}

/// z = mu + sigma .* eps with eps ~ N(0, I).
pub fn sample_latent(lat: &LatentGaussian, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let eps = standard_normal(rng, 1, lat.len());
    &lat.mu + &(&lat.sigma * &eps.row(0))
}

/// z~ = mu + psi .* (sigma .* eps): same mean, inflated spread.
pub fn perturb_latent(
    lat: &LatentGaussian,
    psi: &PerturbationScale,
    rng: &mut ChaCha8Rng,
) -> Array1<f64> {
    let eps = standard_normal(rng, 1, lat.len());
    let scale = psi.broadcast(lat.len());
    &lat.mu + &(&scale * &(&lat.sigma * &eps.row(0)))
}

pub(crate) struct EncCache {

    pub conv_caches: Vec<crate::nn::Conv1dCache>,
    pub relu_outs: Vec<Array2<f64>>,
    pub drop_masks: Vec<Array2<f64>>,
    pub flat: Array2<f64>,
    pub batch: usize,
}

pub(crate) struct DecCache {
    pub z: Array2<f64>,
    pub fc_relu: Array2<f64>,
    pub conv_caches: Vec<crate::nn::Conv1dCache>,
    pub relu_outs: Vec<Array2<f64>>,
    pub drop_masks: Vec<Array2<f64>>,
    pub batch: usize,
}

impl ModelParams {
    pub fn perturbation(&self) -> &PerturbationScale {
        &self.psi
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.nrows() != self.window_len || x.ncols() != self.dims {
            return Err(GeniasError::Shape {
                expected: format!("({}, {})", self.window_len, self.dims),
                actual: format!("({}, {})", x.nrows(), x.ncols()),
            });
        }
        Ok(())
    }

    /// Posterior parameters for one window (deterministic, dropout off).
    pub fn encode(&self, x: &ArrayView2<f64>) -> Result<LatentGaussian> {
        self.check_input(x)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0); // unused at dropout rate 0
        let (mu, logvar, _) = self.encode_pass(&x.view(), 1, 0.0, &mut rng);
        let sigma = logvar.mapv(|v| (0.5 * v).exp().max(SIGMA_FLOOR));
        LatentGaussian::new(mu.row(0).to_owned(), sigma.row(0).to_owned())
    }

    /// Posteriors for a batch of windows, order-preserving.
    pub fn encode_batch(&self, xs: &[ArrayView2<f64>]) -> Result<Vec<LatentGaussian>> {
        xs.iter().map(|x| self.encode(x)).collect()
    }

    /// Decode one latent vector into a (T, D) window (dropout off).
    pub fn decode(&self, z: &ArrayView1<f64>) -> Result<Array2<f64>> {
        if z.len() != self.latent {
            return Err(GeniasError::Shape {
                expected: format!("latent of length {}", self.latent),
                actual: format!("length {}", z.len()),
            });
        }
        let zb = z.insert_axis(Axis(0)).to_owned();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (y, _) = self.decode_pass(&zb.view(), 0.0, &mut rng);
        Ok(y)
    }

    /// One full generation pass: reconstruct and perturb from a shared
    /// encoding, with independent noise draws.
    pub fn forward(
        &self,
        x: &ArrayView2<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Array2<f64>, Array2<f64>, LatentGaussian)> {
        let lat = self.encode(x)?;
        let z = sample_latent(&lat, rng);
        let z_tilde = perturb_latent(&lat, &self.psi, rng);
        let xhat = self.decode(&z.view())?;
        let xtilde = self.decode(&z_tilde.view())?;
        Ok((xhat, xtilde, lat))
    }

    /// Encoder pass over a stacked batch; returns (mu, logvar, cache).
    pub(crate) fn encode_pass(
        &self,
        xb: &ArrayView2<f64>,
        batch: usize,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> (Array2<f64>, Array2<f64>, EncCache) {
        let t_len = self.window_len;
        let mut conv_caches = Vec::new();
        let mut relu_outs = Vec::new();
        let mut drop_masks = Vec::new();
        let mut h = xb.to_owned();
        for conv in &self.enc.convs {
            let (y, cache) = conv.forward(&h.view(), batch, t_len);
            conv_caches.push(cache);
            let r = relu_forward(&y.view());
            relu_outs.push(r.clone());
            let (d, mask) = dropout_forward(&r.view(), dropout, rng);
            drop_masks.push(mask);
            h = d;
        }
        let c_last = *self.arch.channels.last().unwrap();
        let flat = h
            .into_shape_with_order((batch, t_len * c_last))
            .expect("activations are contiguous");
        let mu = self.enc.mu_head.forward(&flat.view());
        let logvar = self.enc.logvar_head.forward(&flat.view());
        (
            mu,
            logvar,
            EncCache {
                conv_caches,
                relu_outs,
                drop_masks,
                flat,
                batch,
            },
        )
    }

    /// Gradients for the encoder parameters in canonical order.
    pub(crate) fn encoder_backward(
        &self,
        cache: &EncCache,
        dmu: &ArrayView2<f64>,
        dlogvar: &ArrayView2<f64>,
    ) -> Vec<Array2<f64>> {
        let (dflat_mu, dw_mu, db_mu) = self.enc.mu_head.backward(&cache.flat.view(), dmu);
        let (dflat_lv, dw_lv, db_lv) = self.enc.logvar_head.backward(&cache.flat.view(), dlogvar);
        let dflat = dflat_mu + dflat_lv;
        let c_last = *self.arch.channels.last().unwrap();
        let mut d = dflat
            .into_shape_with_order((cache.batch * self.window_len, c_last))
            .expect("gradients are contiguous");
        let mut conv_grads = Vec::new();
        for i in (0..self.enc.convs.len()).rev() {
            let d1 = dropout_backward(&cache.drop_masks[i].view(), &d.view());
            let d2 = relu_backward(&cache.relu_outs[i].view(), &d1.view());
            let (dx, dw, db) = self.enc.convs[i].backward(&cache.conv_caches[i], &d2.view());
            conv_grads.push((dw, db));
            d = dx;
        }
        conv_grads.reverse();
        let mut grads = Vec::new();
        for (dw, db) in conv_grads {
            grads.push(dw);
            grads.push(db);
        }
        grads.push(dw_mu);
        grads.push(db_mu);
        grads.push(dw_lv);
        grads.push(db_lv);
        grads
    }

    /// Decoder pass over a batch of latents; returns (output, cache).
    pub(crate) fn decode_pass(
        &self,
        z: &ArrayView2<f64>,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> (Array2<f64>, DecCache) {
        let batch = z.nrows();
        let t_len = self.window_len;
        let c_last = *self.arch.channels.last().unwrap();
        let a = self.dec.fc.forward(z);
        let fc_relu = relu_forward(&a.view());
        let mut h = fc_relu
            .clone()
            .into_shape_with_order((batch * t_len, c_last))
            .expect("activations are contiguous");
        let n = self.dec.convs.len();
        let mut conv_caches = Vec::new();
        let mut relu_outs = Vec::new();
        let mut drop_masks = Vec::new();
        for (i, conv) in self.dec.convs.iter().enumerate() {
            let (y, cache) = conv.forward(&h.view(), batch, t_len);
            conv_caches.push(cache);
            if i < n - 1 {
                let r = relu_forward(&y.view());
                relu_outs.push(r.clone());
                let (d, mask) = dropout_forward(&r.view(), dropout, rng);
                drop_masks.push(mask);
                h = d;
            } else {
                h = y;
            }
        }
        (
            h,
            DecCache {
                z: z.to_owned(),
                fc_relu,
                conv_caches,
                relu_outs,
                drop_masks,
                batch,
            },
        )
    }

    /// Gradients through the decoder; returns (dz, parameter grads).
    pub(crate) fn decoder_backward(
        &self,
        cache: &DecCache,
        dy: &ArrayView2<f64>,
    ) -> (Array2<f64>, Vec<Array2<f64>>) {
        let n = self.dec.convs.len();
        let mut d = dy.to_owned();
        let mut conv_grads = Vec::new();
        for i in (0..n).rev() {
            let (dx, dw, db) = self.dec.convs[i].backward(&cache.conv_caches[i], &d.view());
            conv_grads.push((dw, db));
            d = dx;
            if i > 0 {
                let d1 = dropout_backward(&cache.drop_masks[i - 1].view(), &d.view());
                d = relu_backward(&cache.relu_outs[i - 1].view(), &d1.view());
            }
        }
        conv_grads.reverse();
        let c_last = *self.arch.channels.last().unwrap();
        let dflat = d
            .into_shape_with_order((cache.batch, self.window_len * c_last))
            .expect("gradients are contiguous");
        let dfc_act = relu_backward(&cache.fc_relu.view(), &dflat.view());
        let (dz, dw_fc, db_fc) = self.dec.fc.backward(&cache.z.view(), &dfc_act.view());
        let mut grads = vec![dw_fc, db_fc];
        for (dw, db) in conv_grads {
            grads.push(dw);
            grads.push(db);
        }
        (dz, grads)
    }

    /// Parameter tensors in canonical order: encoder convs (w, b), heads,
    /// decoder fc, decoder convs, then the perturbation parameter.
    pub(crate) fn param_refs_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut refs: Vec<&mut Array2<f64>> = Vec::new();
        for c in &mut self.enc.convs {
            refs.push(&mut c.w);
            refs.push(&mut c.b);
        }
        refs.push(&mut self.enc.mu_head.w);
        refs.push(&mut self.enc.mu_head.b);
        refs.push(&mut self.enc.logvar_head.w);
        refs.push(&mut self.enc.logvar_head.b);
        refs.push(&mut self.dec.fc.w);
        refs.push(&mut self.dec.fc.b);
        for c in &mut self.dec.convs {
            refs.push(&mut c.w);
            refs.push(&mut c.b);
        }
        refs.push(&mut self.psi.rho);
        refs
    }

    pub(crate) fn param_shapes(&mut self) -> Vec<(usize, usize)> {
        self.param_refs_mut()
            .iter()
            .map(|p| (p.nrows(), p.ncols()))
            .collect()
    }

    /// Named views of every parameter, in the same canonical order.
    pub(crate) fn named_params(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = Vec::new();
        for (i, c) in self.enc.convs.iter().enumerate() {
            out.push((format!("enc.conv{i}.w"), &c.w));
            out.push((format!("enc.conv{i}.b"), &c.b));
        }
        out.push(("enc.mu.w".into(), &self.enc.mu_head.w));
        out.push(("enc.mu.b".into(), &self.enc.mu_head.b));
        out.push(("enc.logvar.w".into(), &self.enc.logvar_head.w));
        out.push(("enc.logvar.b".into(), &self.enc.logvar_head.b));
        out.push(("dec.fc.w".into(), &self.dec.fc.w));
        out.push(("dec.fc.b".into(), &self.dec.fc.b));
        for (i, c) in self.dec.convs.iter().enumerate() {
            out.push((format!("dec.conv{i}.w"), &c.w));
            out.push((format!("dec.conv{i}.b"), &c.b));
        }
        out.push(("psi.rho".into(), &self.psi.rho));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_config() -> GenConfig {
        let mut c = GenConfig::for_dims(2);
        c.window_len = 12;
        c.latent = Some(6);
        c.arch = ArchDescriptor {
            channels: vec![4, 6, 6],
            dilations: vec![1, 2, 4],
            kernel_size: 3,
            dropout: 0.1,
        };
        c
    }

    #[test]
    fn init_is_deterministic() {
        let c = small_config();
        let a = init_model(&c, 42).unwrap();
        let b = init_model(&c, 42).unwrap();
        assert_eq!(a, b);
        let other = init_model(&c, 43).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn latent_size_defaults() {
        let m1 = init_model(&GenConfig::for_dims(1), 0).unwrap();
        assert_eq!(m1.latent, 50);
        let m5 = init_model(&GenConfig::for_dims(5), 0).unwrap();
        assert_eq!(m5.latent, 100);
    }

    #[test]
    fn psi_initializes_to_two_and_stays_above_one() {
        let psi = PerturbationScale::init(false, 4);
        assert_relative_eq!(psi.value()[0], 2.0, max_relative = 1e-12);
        let vec = PerturbationScale::init(true, 4);
        assert_eq!(vec.value().len(), 4);
        for rho in [-50.0, -1.0, 0.0, 3.0, 80.0] {
            let p = PerturbationScale {
                rho: ndarray::array![[rho]],
            };
            assert!(p.value()[0] >= 1.0);
        }
    }

    #[test]
    fn encode_is_deterministic_and_positive_sigma() {
        let c = small_config();
        let m = init_model(&c, 7).unwrap();
        let x = Array2::from_shape_fn((12, 2), |(t, d)| ((t + d) as f64 * 0.37).sin() * 0.5 + 0.5);
        let a = m.encode(&x.view()).unwrap();
        let b = m.encode(&x.view()).unwrap();
        assert_eq!(a, b);
        assert!(a.sigma.iter().all(|&s| s > 0.0));
        assert_eq!(a.len(), 6);
    }

    #[test]
    fn encode_shape_mismatch() {
        let m = init_model(&small_config(), 7).unwrap();
        let bad = Array2::zeros((12, 3));
        assert!(m.encode(&bad.view()).is_err());
        let bad_t = Array2::zeros((11, 2));
        assert!(m.encode(&bad_t.view()).is_err());
    }

    #[test]
    fn decode_shape_round_trip_grid() {
        for (t, d, l) in [(8, 1, 4), (12, 2, 6), (16, 3, 5)] {
            let mut c = GenConfig::for_dims(d);
            c.window_len = t;
            c.latent = Some(l);
            c.arch = ArchDescriptor {
                channels: vec![3, 4],
                dilations: vec![1, 2],
                kernel_size: 3,
                dropout: 0.0,
            };
            let m = init_model(&c, 1).unwrap();
            let z = Array1::linspace(-1.0, 1.0, l);
            let y = m.decode(&z.view()).unwrap();
            assert_eq!(y.shape(), &[t, d]);
            assert!(y.iter().all(|v| v.is_finite()));
            // Eval mode is deterministic.
            assert_eq!(y, m.decode(&z.view()).unwrap());
        }
    }

    #[test]
    fn decode_rejects_wrong_latent_length() {
        let m = init_model(&small_config(), 7).unwrap();
        let z = Array1::zeros(5);
        assert!(m.decode(&z.view()).is_err());
    }

    #[test]
    fn sampling_statistics() {
        // 1e5 draws with mu = 0, sigma = 1.
        let lat = LatentGaussian::new(Array1::zeros(4), Array1::ones(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut sum = Array1::<f64>::zeros(4);
        let mut sumsq = Array1::<f64>::zeros(4);
        for _ in 0..n {
            let z = sample_latent(&lat, &mut rng);
            sum += &z;
            sumsq += &z.mapv(|v| v * v);
        }
        let mean = &sum / n as f64;
        let var = &sumsq / n as f64 - &mean.mapv(|m| m * m);
        for j in 0..4 {
            assert!(mean[j].abs() < 0.02, "mean {}", mean[j]);
            assert!((var[j] - 1.0).abs() < 0.05, "var {}", var[j]);
        }
    }

    #[test]
    fn perturbation_inflates_variance_by_psi_squared() {
        let lat = LatentGaussian::new(Array1::zeros(3), Array1::ones(3)).unwrap();
        let psi = PerturbationScale::from_psi(&[2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 100_000;
        let mut sum = Array1::<f64>::zeros(3);
        let mut sumsq = Array1::<f64>::zeros(3);
        for _ in 0..n {
            let z = perturb_latent(&lat, &psi, &mut rng);
            sum += &z;
            sumsq += &z.mapv(|v| v * v);
        }
        let mean = &sum / n as f64;
        let var = &sumsq / n as f64 - &mean.mapv(|m| m * m);
        for j in 0..3 {
            // Var(z~) = psi^2 * Var(z) = 4; mean unchanged within 3 SE.
            let se = 2.0 / (n as f64).sqrt();
            assert!(mean[j].abs() < 3.0 * se, "mean {}", mean[j]);
            assert!((var[j] / 4.0 - 1.0).abs() < 0.05, "var {}", var[j]);
        }
    }

    #[test]
    fn psi_of_one_matches_plain_sampler() {
        let lat = LatentGaussian::new(
            Array1::from_vec(vec![0.5, -1.0]),
            Array1::from_vec(vec![0.3, 2.0]),
        )
        .unwrap();
        let psi = PerturbationScale::from_psi(&[1.0]);
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a = sample_latent(&lat, &mut r1);
        let b = perturb_latent(&lat, &psi, &mut r2);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_sigma_limit_returns_mu() {
        let lat = LatentGaussian::new(
            Array1::from_vec(vec![1.0, -2.0]),
            Array1::from_elem(2, SIGMA_FLOOR),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = sample_latent(&lat, &mut rng);
        for (zi, mi) in z.iter().zip(lat.mu.iter()) {
            assert!((zi - mi).abs() < 1e-3);
        }
    }

    #[test]
    fn reparameterization_is_affine_in_mu_and_sigma() {
        // For fixed eps, d z / d mu = 1 and d z / d sigma = eps; check the
        // analytic gradients of a scalar of z against central differences.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let eps = standard_normal(&mut rng, 1, 3).row(0).to_owned();
        let weights = Array1::from_vec(vec![0.7, -0.4, 1.3]);
        let scalar = |mu: &Array1<f64>, sigma: &Array1<f64>| -> f64 {
            let z = mu + &(sigma * &eps);
            (&z * &weights).sum()
        };
        let mu0 = Array1::from_vec(vec![0.2, -0.1, 0.5]);
        let sigma0 = Array1::from_vec(vec![0.9, 0.4, 1.1]);
        let h = 1e-5;
        for j in 0..3 {
            let mut up = mu0.clone();
            up[j] += h;
            let mut dn = mu0.clone();
            dn[j] -= h;
            let fd = (scalar(&up, &sigma0) - scalar(&dn, &sigma0)) / (2.0 * h);
            assert_relative_eq!(fd, weights[j], max_relative = 1e-4);

            let mut up_s = sigma0.clone();
            up_s[j] += h;
            let mut dn_s = sigma0.clone();
            dn_s[j] -= h;
            let fd_s = (scalar(&mu0, &up_s) - scalar(&mu0, &dn_s)) / (2.0 * h);
            assert_relative_eq!(fd_s, weights[j] * eps[j], max_relative = 1e-4);
        }
    }

    #[test]
    fn forward_shares_encoding_and_is_reproducible() {
        let c = small_config();
        let m = init_model(&c, 3).unwrap();
        let x = Array2::from_shape_fn((12, 2), |(t, _)| 0.5 + 0.3 * (t as f64 * 0.7).cos());
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let (xh1, xt1, lat1) = m.forward(&x.view(), &mut r1).unwrap();
        let (xh2, xt2, lat2) = m.forward(&x.view(), &mut r2).unwrap();
        assert_eq!(xh1, xh2);
        assert_eq!(xt1, xt2);
        assert_eq!(lat1, lat2);
        assert_eq!(xh1.shape(), x.shape());
        assert_eq!(xt1.shape(), x.shape());
    }

    #[test]
    fn encode_batch_preserves_order() {
        let c = small_config();
        let m = init_model(&c, 3).unwrap();
        let xs: Vec<Array2<f64>> = (0..3)
            .map(|i| Array2::from_elem((12, 2), 0.1 * (i + 1) as f64))
            .collect();
        let views: Vec<_> = xs.iter().map(|x| x.view()).collect();
        let lats = m.encode_batch(&views).unwrap();
        for (x, lat) in xs.iter().zip(&lats) {
            assert_eq!(m.encode(&x.view()).unwrap(), *lat);
        }
    }
}
