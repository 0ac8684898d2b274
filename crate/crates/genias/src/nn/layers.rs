//! Layer primitives over batched time-major matrices.
//!
//! Convolutions take activations of shape (B*T, C) where row b*T + t is
//! timestep t of window b; windows never leak into each other because the
//! unfold step respects window boundaries. Dense layers take (B, F).

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::init_uniform;

/// Which way the kernel reaches along the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvDirection {
    /// Tap k reads timestep t - k*dilation (zero-padded past).
    Causal,
    /// Tap k reads timestep t + k*dilation (zero-padded future).
    Anticausal,
}

/// Dilated 1-D convolution, stride 1, length-preserving.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// (c_out, c_in * kernel)
    pub w: Array2<f64>,
    /// (1, c_out)
    pub b: Array2<f64>,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub direction: ConvDirection,
}

pub struct Conv1dCache {
    /// Unfolded input, (B*T, c_in * kernel).
    unfolded: Array2<f64>,
    batch: usize,
    t_len: usize,
}

impl Conv1d {
    pub fn new(
        rng: &mut ChaCha8Rng,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        dilation: usize,
        direction: ConvDirection,
    ) -> Self {
        let fan_in = c_in * kernel;
        Conv1d {
            w: init_uniform(rng, c_out, fan_in, fan_in),
            b: Array2::zeros((1, c_out)),
            c_in,
            c_out,
            kernel,
            dilation,
            direction,
        }
    }

    fn source_row(&self, t: usize, k: usize, t_len: usize) -> Option<usize> {
        let offset = k * self.dilation;
        match self.direction {
            ConvDirection::Causal => t.checked_sub(offset),
            ConvDirection::Anticausal => {
                let s = t + offset;
                (s < t_len).then_some(s)
            }
        }
    }

    fn unfold(&self, x: &ArrayView2<f64>, batch: usize, t_len: usize) -> Array2<f64> {
        let mut u = Array2::zeros((batch * t_len, self.c_in * self.kernel));
        for bi in 0..batch {
            let base = bi * t_len;
            for t in 0..t_len {
                for k in 0..self.kernel {
                    if let Some(s) = self.source_row(t, k, t_len) {
                        for i in 0..self.c_in {
                            u[[base + t, i * self.kernel + k]] = x[[base + s, i]];
                        }
                    }
                }
            }
        }
        u
    }

    pub fn forward(&self, x: &ArrayView2<f64>, batch: usize, t_len: usize) -> (Array2<f64>, Conv1dCache) {
        debug_assert_eq!(x.nrows(), batch * t_len);
        debug_assert_eq!(x.ncols(), self.c_in);
        let unfolded = self.unfold(x, batch, t_len);
        let y = unfolded.dot(&self.w.t()) + &self.b;
        (
            y,
            Conv1dCache {
                unfolded,
                batch,
                t_len,
            },
        )
    }

    /// Returns (dx, dw, db).
    pub fn backward(
        &self,
        cache: &Conv1dCache,
        dy: &ArrayView2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let dw = dy.t().dot(&cache.unfolded);
        let db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        let du = dy.dot(&self.w);
        let mut dx = Array2::zeros((cache.batch * cache.t_len, self.c_in));
        for bi in 0..cache.batch {
            let base = bi * cache.t_len;
            for t in 0..cache.t_len {
                for k in 0..self.kernel {
                    if let Some(s) = self.source_row(t, k, cache.t_len) {
                        for i in 0..self.c_in {
                            dx[[base + s, i]] += du[[base + t, i * self.kernel + k]];
                        }
                    }
                }
            }
        }
        (dx, dw, db)
    }
}

/// Fully connected layer, y = x W^T + b.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// (out, in)
    pub w: Array2<f64>,
    /// (1, out)
    pub b: Array2<f64>,
}

impl Dense {
    pub fn new(rng: &mut ChaCha8Rng, input: usize, output: usize) -> Self {
        Dense {
            w: init_uniform(rng, output, input, input),
            b: Array2::zeros((1, output)),
        }
    }

    /// Bias-free variant, used by the one-class embedder.
    pub fn new_no_bias(rng: &mut ChaCha8Rng, input: usize, output: usize) -> Self {
        let mut d = Self::new(rng, input, output);
        d.b.fill(0.0);
        d
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    /// Returns (dx, dw, db). `x` is the forward input.
    pub fn backward(
        &self,
        x: &ArrayView2<f64>,
        dy: &ArrayView2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let dx = dy.dot(&self.w);
        let dw = dy.t().dot(x);
        let db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        (dx, dw, db)
    }
}

pub fn relu_forward(x: &ArrayView2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// `y` is the forward output.
pub fn relu_backward(y: &ArrayView2<f64>, dy: &ArrayView2<f64>) -> Array2<f64> {
    let mut dx = dy.to_owned();
    dx.zip_mut_with(y, |g, &v| {
        if v <= 0.0 {
            *g = 0.0;
        }
    });
    dx
}

/// Inverted dropout; returns (y, mask). Rate 0 short-circuits to identity.
pub fn dropout_forward(
    x: &ArrayView2<f64>,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> (Array2<f64>, Array2<f64>) {
    if rate == 0.0 {
        return (x.to_owned(), Array2::ones(x.raw_dim()));
    }
    let keep = 1.0 - rate;
    let mask = Array2::from_shape_fn(x.raw_dim(), |_| {
        if rng.gen_bool(keep) {
            1.0 / keep
        } else {
            0.0
        }
    });
    (x * &mask, mask)
}

pub fn dropout_backward(mask: &ArrayView2<f64>, dy: &ArrayView2<f64>) -> Array2<f64> {
    dy * mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    fn fd_check(
        f: &mut dyn FnMut(&Array2<f64>) -> f64,
        at: &Array2<f64>,
        analytic: &Array2<f64>,
        h: f64,
    ) {
        let mut p = at.clone();
        for idx in ndarray::indices(at.raw_dim()) {
            let orig = p[idx];
            p[idx] = orig + h;
            let up = f(&p);
            p[idx] = orig - h;
            let down = f(&p);
            p[idx] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = analytic[idx];
            let scale = fd.abs().max(an.abs());
            if scale > 1e-6 {
                assert!((fd - an).abs() / scale <= 1e-5, "fd {fd} vs analytic {an}");
            } else {
                assert!((fd - an).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn conv_shapes_and_known_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv1d::new(&mut rng, 1, 1, 2, 1, ConvDirection::Causal);
        conv.w = array![[2.0, 1.0]]; // tap 0 weight 2 (current), tap 1 weight 1 (previous)
        conv.b = array![[0.5]];
        let x = array![[1.0], [2.0], [3.0]];
        let (y, _) = conv.forward(&x.view(), 1, 3);
        // y[t] = 2 x[t] + 1 x[t-1] + 0.5
        assert_eq!(y, array![[2.5], [5.5], [8.5]]);
    }

    #[test]
    fn anticausal_conv_reads_future() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv1d::new(&mut rng, 1, 1, 2, 1, ConvDirection::Anticausal);
        conv.w = array![[1.0, 1.0]];
        conv.b = array![[0.0]];
        let x = array![[1.0], [2.0], [3.0]];
        let (y, _) = conv.forward(&x.view(), 1, 3);
        assert_eq!(y, array![[3.0], [5.0], [3.0]]);
    }

    #[test]
    fn conv_respects_window_boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv1d::new(&mut rng, 1, 1, 2, 1, ConvDirection::Causal);
        conv.w = array![[0.0, 1.0]]; // pure look-back
        conv.b = array![[0.0]];
        // Two windows of length 2 stacked: the second window's first step
        // must not see the first window's last step.
        let x = array![[1.0], [2.0], [10.0], [20.0]];
        let (y, _) = conv.forward(&x.view(), 2, 2);
        assert_eq!(y, array![[0.0], [1.0], [0.0], [10.0]]);
    }

    #[test]
    fn conv_backward_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv1d::new(&mut rng, 2, 3, 3, 2, ConvDirection::Causal);
        let x = super::super::standard_normal(&mut rng, 2 * 6, 2);
        let (y0, cache) = conv.forward(&x.view(), 2, 6);
        // Scalar objective: sum of squares of outputs.
        let dy = y0.mapv(|v| 2.0 * v);
        let (dx, dw, db) = conv.backward(&cache, &dy.view());

        let mut fx = |p: &Array2<f64>| {
            let (y, _) = conv.forward(&p.view(), 2, 6);
            y.iter().map(|v| v * v).sum()
        };
        fd_check(&mut fx, &x, &dx, 1e-5);

        let mut conv_w = conv.clone();
        let mut fw = |p: &Array2<f64>| {
            conv_w.w = p.clone();
            let (y, _) = conv_w.forward(&x.view(), 2, 6);
            y.iter().map(|v| v * v).sum()
        };
        fd_check(&mut fw, &conv.w, &dw, 1e-5);

        let mut conv_b = conv.clone();
        let mut fb = |p: &Array2<f64>| {
            conv_b.b = p.clone();
            let (y, _) = conv_b.forward(&x.view(), 2, 6);
            y.iter().map(|v| v * v).sum()
        };
        fd_check(&mut fb, &conv.b, &db, 1e-5);
    }

    #[test]
    fn anticausal_backward_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let conv = Conv1d::new(&mut rng, 2, 2, 3, 4, ConvDirection::Anticausal);
        let x = super::super::standard_normal(&mut rng, 12, 2);
        let (y0, cache) = conv.forward(&x.view(), 1, 12);
        let dy = y0.mapv(|v| 2.0 * v);
        let (dx, _, _) = conv.backward(&cache, &dy.view());
        let mut fx = |p: &Array2<f64>| {
            let (y, _) = conv.forward(&p.view(), 1, 12);
            y.iter().map(|v| v * v).sum()
        };
        fd_check(&mut fx, &x, &dx, 1e-5);
    }

    #[test]
    fn dense_backward_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dense = Dense::new(&mut rng, 4, 3);
        let x = super::super::standard_normal(&mut rng, 5, 4);
        let y0 = dense.forward(&x.view());
        let dy = y0.mapv(|v| 2.0 * v);
        let (dx, dw, db) = dense.backward(&x.view(), &dy.view());

        let mut fx = |p: &Array2<f64>| dense.forward(&p.view()).iter().map(|v| v * v).sum();
        fd_check(&mut fx, &x, &dx, 1e-5);

        let mut d2 = dense.clone();
        let mut fw = |p: &Array2<f64>| {
            d2.w = p.clone();
            d2.forward(&x.view()).iter().map(|v| v * v).sum()
        };
        fd_check(&mut fw, &dense.w, &dw, 1e-5);

        let mut d3 = dense.clone();
        let mut fb = |p: &Array2<f64>| {
            d3.b = p.clone();
            d3.forward(&x.view()).iter().map(|v| v * v).sum()
        };
        fd_check(&mut fb, &dense.b, &db, 1e-5);
    }

    #[test]
    fn relu_and_dropout_behave() {
        let x = array![[-1.0, 2.0], [0.0, -3.0]];
        let y = relu_forward(&x.view());
        assert_eq!(y, array![[0.0, 2.0], [0.0, 0.0]]);
        let dy = array![[1.0, 1.0], [1.0, 1.0]];
        assert_eq!(relu_backward(&y.view(), &dy.view()), array![[0.0, 1.0], [0.0, 0.0]]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let big = Array2::ones((100, 100));
        let (dropped, mask) = dropout_forward(&big.view(), 0.1, &mut rng);
        let kept = mask.iter().filter(|&&m| m > 0.0).count();
        // Expect about 90% kept.
        assert!((0.85..0.95).contains(&(kept as f64 / 10_000.0)));
        // Inverted scaling keeps the expectation.
        let mean = dropped.iter().sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.05);
    }
}
