//! Generation-quality evaluation: a fixed 128-dimensional one-class
//! embedding (distance-to-center objective, bias-free layers), proximity of
//! generated anomalies to real ones (ARP), and an entropy-based diversity
//! index (EDI) over a seeded partition of the shared embedding space.

use ndarray::{Array1, Array2, ArrayView2, s};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::WindowTensor;
use crate::error::{GeniasError, Result};
use crate::nn::{relu_backward, relu_forward, Adam, Conv1d, ConvDirection, Dense};

pub const EMBED_DIM: usize = 128;
const EMB_C1: usize = 16;
const EMB_C2: usize = 32;
const EMB_EPOCHS: usize = 100;

/// One-class embedding network with its hypersphere center.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    conv1: Conv1d,
    conv2: Conv1d,
    head: Dense,
    pub center: Array1<f64>,
    pub collapse_warning: bool,
    pub epochs: usize,
    pub seed: u64,
    window_len: usize,
    dims: usize,
}

impl EmbeddingModel {
    /// Embed one window into the fixed 128-dimensional space.
    pub fn embed(&self, x: &ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.nrows() != self.window_len || x.ncols() != self.dims {
            return Err(GeniasError::Shape {
                expected: format!("({}, {})", self.window_len, self.dims),
                actual: format!("({}, {})", x.nrows(), x.ncols()),
            });
        }
        Ok(self.forward(x, 1).0.row(0).to_owned())
    }

    pub fn embed_batch(&self, windows: &[WindowTensor]) -> Result<Vec<Array1<f64>>> {
        windows.iter().map(|w| self.embed(&w.data.view())).collect()
    }

    fn forward(&self, xb: &ArrayView2<f64>, batch: usize) -> (Array2<f64>, EmbCache) {
        let t_len = self.window_len;
        let (y1, c1) = self.conv1.forward(xb, batch, t_len);
        let r1 = relu_forward(&y1.view());
        let (y2, c2) = self.conv2.forward(&r1.view(), batch, t_len);
        let r2 = relu_forward(&y2.view());
        let mut pooled = Array2::zeros((batch, EMB_C2));
        for b in 0..batch {
            let win = r2.slice(s![b * t_len..(b + 1) * t_len, ..]);
            for c in 0..EMB_C2 {
                pooled[[b, c]] = win.column(c).sum() / t_len as f64;
            }
        }
        let out = self.head.forward(&pooled.view());
        (
            out,
            EmbCache {
                c1,
                r1,
                c2,
                r2,
                pooled,
                batch,
            },
        )
    }

    fn backward(&self, cache: &EmbCache, dout: &ArrayView2<f64>) -> Vec<Array2<f64>> {
        let t_len = self.window_len;
        let (dpooled, dw_head, _) = self.head.backward(&cache.pooled.view(), dout);
        let mut dr2 = Array2::zeros((cache.batch * t_len, EMB_C2));
        for b in 0..cache.batch {
            for c in 0..EMB_C2 {
                let g = dpooled[[b, c]] / t_len as f64;
                for t in 0..t_len {
                    dr2[[b * t_len + t, c]] = g;
                }
            }
        }
        let dr2 = relu_backward(&cache.r2.view(), &dr2.view());
        let (dr1, dw_c2, _) = self.conv2.backward(&cache.c2, &dr2.view());
        let dr1 = relu_backward(&cache.r1.view(), &dr1.view());
        let (_, dw_c1, _) = self.conv1.backward(&cache.c1, &dr1.view());
        // Bias-free by construction: only weight tensors train.
        vec![dw_c1, dw_c2, dw_head]
    }

    fn weight_refs_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![&mut self.conv1.w, &mut self.conv2.w, &mut self.head.w]
    }

    /// SHA-256 over the parameter bytes, for report provenance.
    pub fn params_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for tensor in [&self.conv1.w, &self.conv2.w, &self.head.w] {
            for v in tensor.iter() {
                hasher.update(v.to_le_bytes());
            }
        }
        for v in self.center.iter() {
            hasher.update(v.to_le_bytes());
        }
        format!("{:x}", hasher.finalize())
    }
}

struct EmbCache {
    c1: crate::nn::Conv1dCache,
    r1: Array2<f64>,
    c2: crate::nn::Conv1dCache,
    r2: Array2<f64>,
    pooled: Array2<f64>,
    batch: usize,
}

/// Train the one-class embedder: the center is the mean embedding after an
/// initial forward pass, then parameters minimize the mean squared distance
/// of embeddings to that fixed center.
pub fn train_embedder(windows: &[WindowTensor], seed: u64) -> Result<EmbeddingModel> {
    if windows.len() < 32 {
        return Err(GeniasError::Validation(format!(
            "embedder needs at least 32 windows, got {}",
            windows.len()
        )));
    }
    let t_len = windows[0].window_len();
    let dims = windows[0].dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = EmbeddingModel {
        conv1: Conv1d::new(&mut rng, dims, EMB_C1, 3, 1, ConvDirection::Causal),
        conv2: Conv1d::new(&mut rng, EMB_C1, EMB_C2, 3, 2, ConvDirection::Causal),
        head: Dense::new_no_bias(&mut rng, EMB_C2, EMBED_DIM),
        center: Array1::zeros(EMBED_DIM),
        collapse_warning: false,
        epochs: EMB_EPOCHS,
        seed,
        window_len: t_len,
        dims,
    };

    let stack = |idxs: &[usize]| -> Array2<f64> {
        let mut xb = Array2::zeros((idxs.len() * t_len, dims));
        for (i, &idx) in idxs.iter().enumerate() {
            xb.slice_mut(s![i * t_len..(i + 1) * t_len, ..])
                .assign(&windows[idx].data);
        }
        xb
    };

    // Center from the initialization forward pass over everything.
    let all: Vec<usize> = (0..windows.len()).collect();
    let (emb0, _) = model.forward(&stack(&all).view(), windows.len());
    model.center = emb0.mean_axis(ndarray::Axis(0)).unwrap();

    let mut optimizer = Adam::new(
        &model
            .weight_refs_mut()
            .iter()
            .map(|p| (p.nrows(), p.ncols()))
            .collect::<Vec<_>>(),
    );
    let batch_size = 64.min(windows.len());
    let mut order: Vec<usize> = (0..windows.len()).collect();
    for _ in 0..EMB_EPOCHS {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let xb = stack(chunk);
            let (emb, cache) = model.forward(&xb.view(), chunk.len());
            let diff = &emb - &model.center;
            let dout = diff.mapv(|v| 2.0 * v / chunk.len() as f64);
            let mut grads = model.backward(&cache, &dout.view());
            crate::nn::clip_global_norm(&mut grads, 5.0);
            let mut params = model.weight_refs_mut();
            optimizer.step(&mut params, &grads, 1e-3);
        }
    }

    // Degenerate collapse: embeddings carry essentially no variance.
    let (emb_final, _) = model.forward(&stack(&all).view(), windows.len());
    let mean = emb_final.mean_axis(ndarray::Axis(0)).unwrap();
    let var: f64 = emb_final
        .rows()
        .into_iter()
        .map(|r| (&r - &mean).mapv(|v| v * v).sum())
        .sum::<f64>()
        / (windows.len() * EMBED_DIM) as f64;
    model.collapse_warning = var < 1e-8;
    Ok(model)
}

fn euclidean(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    (a - b).mapv(|v| v * v).sum().sqrt()
}

/// Proximity of generated anomalies to real ones:
/// 1 / (1 + mean over real vectors of the distance to the nearest generated
/// vector). Higher means closer coverage.
pub fn arp(v_real: &[Array1<f64>], v_gen: &[Array1<f64>]) -> Result<f64> {
    if v_real.is_empty() || v_gen.is_empty() {
        return Err(GeniasError::Metric("ARP needs non-empty vector sets".into()));
    }
    let mut acc = 0.0;
    for vr in v_real {
        let min_d = v_gen
            .iter()
            .map(|vg| euclidean(vr, vg))
            .fold(f64::INFINITY, f64::min);
        acc += min_d;
    }
    Ok(1.0 / (1.0 + acc / v_real.len() as f64))
}

/// K non-overlapping regions as nearest-centroid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub centroids: Vec<Array1<f64>>,
}

impl Partition {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Nearest centroid, ties resolved to the lowest index.
    pub fn assign(&self, v: &Array1<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = euclidean(v, c);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Region count heuristic: min(32, n/10), at least 2.
pub fn default_k(n_all: usize) -> usize {
    (n_all / 10).min(32).max(2)
}

/// Seeded k-means++ initialization followed by Lloyd iterations.
pub fn build_partition(v_all: &[Array1<f64>], k: usize, seed: u64) -> Result<Partition> {
    if k < 2 {
        return Err(GeniasError::Param(format!("need K >= 2, got {k}")));
    }
    if v_all.len() < k {
        return Err(GeniasError::Param(format!(
            "need at least K = {k} vectors, got {}",
            v_all.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Array1<f64>> = Vec::with_capacity(k);
    centroids.push(v_all[rng.gen_range(0..v_all.len())].clone());
    while centroids.len() < k {
        let weights: Vec<f64> = v_all
            .iter()
            .map(|v| {
                centroids
                    .iter()
                    .map(|c| {
                        let d = euclidean(v, c);
                        d * d
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let next = match WeightedIndex::new(&weights) {
            Ok(dist) => dist.sample(&mut rng),
            // All remaining points coincide with centroids; fall back to a
            // uniform draw.
            Err(_) => rng.gen_range(0..v_all.len()),
        };
        centroids.push(v_all[next].clone());
    }

    let mut assignment = vec![usize::MAX; v_all.len()];
    for _ in 0..100 {
        let part = Partition {
            centroids: centroids.clone(),
        };
        let new_assignment: Vec<usize> = v_all.iter().map(|v| part.assign(v)).collect();
        if new_assignment == assignment {
            break;
        }
        assignment = new_assignment;
        for (ci, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Array1<f64>> = v_all
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == ci)
                .map(|(v, _)| v)
                .collect();
            if members.is_empty() {
                continue; // keep the previous centroid
            }
            let mut mean = Array1::zeros(members[0].len());
            for m in &members {
                mean += *m;
            }
            *centroid = mean / members.len() as f64;
        }
    }
    Ok(Partition { centroids })
}

/// Normalized Shannon entropy of the region proportions of one generator's
/// vectors: -sum p_i ln p_i / ln K, with 0 ln 0 := 0.
pub fn edi(v_gen: &[Array1<f64>], partition: &Partition) -> Result<f64> {
    if v_gen.is_empty() {
        return Err(GeniasError::Metric("EDI needs a non-empty vector set".into()));
    }
    let k = partition.k();
    let mut counts = vec![0usize; k];
    for v in v_gen {
        counts[partition.assign(v)] += 1;
    }
    let n = v_gen.len() as f64;
    let entropy: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    Ok(entropy / (k as f64).ln())
}

/// Fixed-dimension embedding sets for one evaluation: real anomalies,
/// per-generator generated anomalies, their union, and the shared
/// partition every diversity index is computed against.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    pub v_real: Vec<Array1<f64>>,
    /// One set per evaluated generator.
    pub v_gen: Vec<Vec<Array1<f64>>>,
    pub partition: Partition,
}

impl EmbeddingSpace {
    /// Build from the real-anomaly embeddings and one set per generator;
    /// the partition is fit on the union of all generated sets.
    pub fn build(
        v_real: Vec<Array1<f64>>,
        v_gen: Vec<Vec<Array1<f64>>>,
        k: usize,
        seed: u64,
    ) -> Result<Self> {
        let v_all: Vec<Array1<f64>> = v_gen.iter().flatten().cloned().collect();
        let partition = build_partition(&v_all, k, seed)?;
        Ok(EmbeddingSpace {
            v_real,
            v_gen,
            partition,
        })
    }

    /// Realism of generator `m` against the real anomalies.
    pub fn arp_for(&self, m: usize) -> Result<f64> {
        arp(&self.v_real, &self.v_gen[m])
    }

    /// Diversity of generator `m` over the shared partition.
    pub fn edi_for(&self, m: usize) -> Result<f64> {
        edi(&self.v_gen[m], &self.partition)
    }
}

/// Report written by the evaluation command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenQualityReport {
    pub arp: f64,
    pub edi: f64,
    pub k: usize,
    pub n_real: usize,
    pub n_gen: usize,
    pub embedder_hash: String,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(vals: &[f64]) -> Array1<f64> {
        Array1::from_vec(vals.to_vec())
    }

    #[test]
    fn arp_hand_values() {
        // Generated superset of real: every minimum distance is zero.
        let real = vec![v(&[1.0, 0.0]), v(&[0.0, 2.0])];
        let gen_sup = vec![v(&[1.0, 0.0]), v(&[0.0, 2.0]), v(&[5.0, 5.0])];
        assert_relative_eq!(arp(&real, &gen_sup).unwrap(), 1.0);

        // Single real point at distance 1.
        let one_real = vec![v(&[0.0, 0.0])];
        let one_gen = vec![v(&[1.0, 0.0])];
        assert_relative_eq!(arp(&one_real, &one_gen).unwrap(), 0.5);

        // Two real points at distances 1 and 3: 1 / (1 + 2).
        let reals = vec![v(&[1.0]), v(&[3.0])];
        let gens = vec![v(&[0.0])];
        assert_relative_eq!(arp(&reals, &gens).unwrap(), 1.0 / 3.0);

        assert!(arp(&[], &gens).is_err());
        assert!(arp(&reals, &[]).is_err());
    }

    #[test]
    fn arp_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let real: Vec<Array1<f64>> = (0..8)
            .map(|_| Array1::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0)))
            .collect();
        let mut generated: Vec<Array1<f64>> = (0..10)
            .map(|_| Array1::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0)))
            .collect();
        let full = arp(&real, &generated).unwrap();
        assert!(full > 0.0 && full <= 1.0);

        // Removing a generated point cannot increase ARP.
        generated.pop();
        let smaller = arp(&real, &generated).unwrap();
        assert!(smaller <= full + 1e-15);

        // Translation invariance.
        let shift = Array1::from_elem(4, 3.7);
        let real_s: Vec<Array1<f64>> = real.iter().map(|r| r + &shift).collect();
        let gen_s: Vec<Array1<f64>> = generated.iter().map(|g| g + &shift).collect();
        assert_relative_eq!(
            arp(&real, &generated).unwrap(),
            arp(&real_s, &gen_s).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn partition_separates_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut points = Vec::new();
        for _ in 0..20 {
            points.push(Array1::from_shape_fn(3, |_| rng.gen_range(-0.1..0.1)));
        }
        for _ in 0..20 {
            points.push(Array1::from_shape_fn(3, |_| 10.0 + rng.gen_range(-0.1..0.1)));
        }
        let part = build_partition(&points, 2, 7).unwrap();
        let first: Vec<usize> = points[..20].iter().map(|p| part.assign(p)).collect();
        let second: Vec<usize> = points[20..].iter().map(|p| part.assign(p)).collect();
        assert!(first.iter().all(|&a| a == first[0]));
        assert!(second.iter().all(|&a| a == second[0]));
        assert_ne!(first[0], second[0]);
    }

    #[test]
    fn partition_determinism_and_degenerate_k() {
        let points: Vec<Array1<f64>> = (0..6).map(|i| v(&[i as f64, 0.0])).collect();
        let a = build_partition(&points, 3, 5).unwrap();
        let b = build_partition(&points, 3, 5).unwrap();
        assert_eq!(a, b);

        // K equal to the point count puts every point in its own region.
        let own = build_partition(&points, 6, 1).unwrap();
        let mut assigned: Vec<usize> = points.iter().map(|p| own.assign(p)).collect();
        assigned.sort_unstable();
        assigned.dedup();
        assert_eq!(assigned.len(), 6);

        assert!(build_partition(&points, 7, 0).is_err());
        assert!(build_partition(&points, 1, 0).is_err());
    }

    #[test]
    fn edi_hand_values() {
        // Fixed centroids on a line; assignment by nearest.
        let part = Partition {
            centroids: vec![v(&[0.0]), v(&[1.0]), v(&[2.0]), v(&[3.0])],
        };
        // All vectors in one region.
        let concentrated = vec![v(&[0.0]), v(&[0.1]), v(&[0.05])];
        assert_relative_eq!(edi(&concentrated, &part).unwrap(), 0.0);

        // Exactly uniform over K = 4 regions.
        let uniform = vec![v(&[0.0]), v(&[1.0]), v(&[2.0]), v(&[3.0])];
        assert_relative_eq!(edi(&uniform, &part).unwrap(), 1.0, max_relative = 1e-12);

        // K = 2, proportions (0.75, 0.25): entropy 0.5623 nats over ln 2.
        let part2 = Partition {
            centroids: vec![v(&[0.0]), v(&[1.0])],
        };
        let skewed = vec![v(&[0.0]), v(&[0.0]), v(&[0.0]), v(&[1.0])];
        let expected = -(0.75f64.ln() * 0.75 + 0.25f64.ln() * 0.25) / 2.0f64.ln();
        assert_relative_eq!(edi(&skewed, &part2).unwrap(), expected, max_relative = 1e-12);
        assert!((edi(&skewed, &part2).unwrap() - 0.8113).abs() < 1e-4);
    }

    #[test]
    fn edi_invariances() {
        let part = Partition {
            centroids: vec![v(&[0.0]), v(&[5.0]), v(&[10.0])],
        };
        let vs = vec![v(&[0.1]), v(&[5.2]), v(&[9.8]), v(&[0.4])];
        let base = edi(&vs, &part).unwrap();
        assert!((0.0..=1.0).contains(&base));

        // Duplicating every vector leaves proportions unchanged.
        let mut doubled = vs.clone();
        doubled.extend(vs.iter().cloned());
        assert_relative_eq!(edi(&doubled, &part).unwrap(), base, max_relative = 1e-12);

        // Permuting region labels leaves the entropy unchanged.
        let permuted = Partition {
            centroids: vec![v(&[10.0]), v(&[0.0]), v(&[5.0])],
        };
        assert_relative_eq!(edi(&vs, &permuted).unwrap(), base, max_relative = 1e-12);
    }

    #[test]
    fn embedding_space_unions_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let blob = |center: f64, n: usize, rng: &mut ChaCha8Rng| -> Vec<Array1<f64>> {
            (0..n)
                .map(|_| Array1::from_shape_fn(2, |_| center + rng.gen_range(-0.1..0.1)))
                .collect()
        };
        let real = blob(0.0, 6, &mut rng);
        // Generator 0 spreads over both modes, generator 1 sits in one.
        let mut g0 = blob(0.0, 8, &mut rng);
        g0.extend(blob(5.0, 8, &mut rng));
        let g1 = blob(5.0, 16, &mut rng);
        let space = EmbeddingSpace::build(real, vec![g0, g1], 2, 3).unwrap();
        let edi0 = space.edi_for(0).unwrap();
        let edi1 = space.edi_for(1).unwrap();
        assert!(edi0 > edi1, "the spread-out generator is more diverse");
        // Generator 0 covers the real mode; generator 1 does not.
        assert!(space.arp_for(0).unwrap() > space.arp_for(1).unwrap());
    }

    #[test]
    fn default_k_heuristic() {
        assert_eq!(default_k(5), 2);
        assert_eq!(default_k(100), 10);
        assert_eq!(default_k(5000), 32);
    }

    fn corpus(count: usize, seed: u64) -> Vec<WindowTensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                WindowTensor::new(
                    Array2::from_shape_fn((16, 1), |(t, _)| {
                        0.5 + 0.3 * (t as f64 * 0.5 + phase).sin()
                    }),
                    (format!("w{i}"), 0),
                    None,
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn embedder_contract() {
        let windows = corpus(40, 2);
        let model = train_embedder(&windows, 5).unwrap();
        let emb = model.embed_batch(&windows).unwrap();
        assert!(emb.iter().all(|e| e.len() == EMBED_DIM));

        // Same seed, same embeddings.
        let model2 = train_embedder(&windows, 5).unwrap();
        assert_eq!(model, model2);

        // Too few windows rejected.
        assert!(train_embedder(&windows[..10], 0).is_err());
    }

    #[test]
    fn embedder_training_tightens_the_sphere() {
        let windows = corpus(48, 9);
        let trained = train_embedder(&windows, 3).unwrap();
        // Rebuild the untrained network deterministically for the baseline.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let untrained = EmbeddingModel {
            conv1: Conv1d::new(&mut rng, 1, EMB_C1, 3, 1, ConvDirection::Causal),
            conv2: Conv1d::new(&mut rng, EMB_C1, EMB_C2, 3, 2, ConvDirection::Causal),
            head: Dense::new_no_bias(&mut rng, EMB_C2, EMBED_DIM),
            center: trained.center.clone(),
            collapse_warning: false,
            epochs: 0,
            seed: 3,
            window_len: 16,
            dims: 1,
        };
        let dist = |m: &EmbeddingModel| -> f64 {
            m.embed_batch(&windows)
                .unwrap()
                .iter()
                .map(|e| (e - &m.center).mapv(|v| v * v).sum())
                .sum::<f64>()
                / windows.len() as f64
        };
        assert!(dist(&trained) <= dist(&untrained));
    }
}
