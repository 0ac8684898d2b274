//! Adaptive-moment optimizer with global-norm gradient clipping.

use ndarray::Array2;

/// Adam with decay constants (0.9, 0.999) and eps 1e-8.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: usize,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(param_shapes: &[(usize, usize)]) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: param_shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v: param_shapes.iter().map(|&s| Array2::zeros(s)).collect(),
        }
    }

    /// One update over params and grads in matching order.
    pub fn step(&mut self, params: &mut [&mut Array2<f64>], grads: &[Array2<f64>], lr: f64) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            m.zip_mut_with(g, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.zip_mut_with(g, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            for ((p, &m), &v) in p.iter_mut().zip(m.iter()).zip(v.iter()) {
                let mhat = m / bc1;
                let vhat = v / bc2;
                *p -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Scale all grads down in place when their global L2 norm exceeds `max_norm`.
pub fn clip_global_norm(grads: &mut [Array2<f64>], max_norm: f64) -> f64 {
    let sq: f64 = grads.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>()).sum();
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.mapv_inplace(|v| v * scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn adam_descends_quadratic() {
        // Minimize f(p) = |p|^2 / 2; gradient p.
        let mut p = array![[5.0, -3.0]];
        let mut opt = Adam::new(&[(1, 2)]);
        for _ in 0..2000 {
            let g = p.clone();
            opt.step(&mut [&mut p], &[g], 0.05);
        }
        assert!(p.iter().all(|v| v.abs() < 1e-3), "{p:?}");
    }

    #[test]
    fn clipping_caps_norm() {
        let mut grads = vec![array![[3.0, 4.0]]];
        let norm = clip_global_norm(&mut grads, 1.0);
        assert_eq!(norm, 5.0);
        let clipped: f64 = grads[0].iter().map(|v| v * v).sum::<f64>();
        assert!((clipped.sqrt() - 1.0).abs() < 1e-12);

        let mut small = vec![array![[0.3, 0.4]]];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small[0], array![[0.3, 0.4]]);
    }
}
