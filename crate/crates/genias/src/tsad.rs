//! Downstream detection evaluation: reconstruction-error scores from the
//! trained generator, a small convolutional classifier trained on normals
//! versus generated anomalies, and threshold-based metrics.

use ndarray::{Array2, ArrayView2, s};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::WindowTensor;
use crate::error::{GeniasError, Result};
use crate::model::ModelParams;
use crate::nn::{relu_backward, relu_forward, Adam, Conv1d, ConvDirection, Dense};
use crate::objectives::mse_distance;

/// Anomaly scores paired with ground-truth window labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWindows {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ScoredWindows {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(GeniasError::Metric(format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(GeniasError::Metric("scores must be finite".into()));
        }
        Ok(ScoredWindows { scores, labels })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub best_f1: f64,
    pub best_threshold: f64,
    pub aupr: f64,
    pub auroc: f64,
}

/// Report written by the evaluation command, one per detector kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub dataset: String,
    pub model_hash: String,
    pub detector: String,
    pub best_f1: f64,
    pub best_threshold: f64,
    pub aupr: f64,
    pub auroc: f64,
    pub n_windows: usize,
    pub prevalence: f64,
}

/// Anomaly score per window: reconstruction MSE through the posterior mean
/// (no sampling, fully deterministic).
pub fn recon_score(model: &ModelParams, windows: &[WindowTensor]) -> Result<Vec<f64>> {
    windows
        .iter()
        .map(|w| {
            let lat = model.encode(&w.data.view())?;
            let rec = model.decode(&lat.mu.view())?;
            mse_distance(&w.data.view(), &rec.view())
        })
        .collect()
}

/// Best F1 over unique-score midpoints, AUPR by the precision-recall step
/// integral over the same thresholds, and AUROC by the rank statistic with
/// ties counted one half.
pub fn detection_metrics(scored: &ScoredWindows) -> Result<DetectionMetrics> {
    let n_pos = scored.labels.iter().filter(|&&l| l == 1).count();
    let n_neg = scored.labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(GeniasError::Metric(
            "labels must contain both classes".into(),
        ));
    }

    // Sort descending by score, grouping exact ties.
    let mut order: Vec<usize> = (0..scored.scores.len()).collect();
    order.sort_by(|&a, &b| scored.scores[b].partial_cmp(&scored.scores[a]).unwrap());

    let mut best_f1 = 0.0;
    let mut best_threshold = scored.scores[order[0]] + 1.0; // empty prediction set
    let mut aupr = 0.0;
    let mut prev_recall = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let score = scored.scores[order[i]];
        // Absorb the whole tie group.
        while i < order.len() && scored.scores[order[i]] == score {
            if scored.labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // Threshold strictly below this group: midpoint to the next distinct
        // score, or just below the minimum after the final group.
        let threshold = if i < order.len() {
            0.5 * (score + scored.scores[order[i]])
        } else {
            score - 1.0
        };
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / n_pos as f64;
        let f1 = if tp == 0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        if f1 > best_f1 {
            best_f1 = f1;
            best_threshold = threshold;
        }
        aupr += (recall - prev_recall) * precision;
        prev_recall = recall;
    }

    Ok(DetectionMetrics {
        best_f1,
        best_threshold,
        aupr,
        auroc: auroc_rank(&scored.scores, &scored.labels, n_pos, n_neg),
    })
}

fn auroc_rank(scores: &[f64], labels: &[u8], n_pos: usize, n_neg: usize) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // Average ranks over tie groups (1-based).
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    u / (n_pos as f64 * n_neg as f64)
}

/// Small convolutional window classifier emitting probability of anomaly.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierDetector {
    conv1: Conv1d,
    conv2: Conv1d,
    fc1: Dense,
    fc2: Dense,
    window_len: usize,
    dims: usize,
}

const CLS_C1: usize = 16;
const CLS_C2: usize = 32;
const CLS_HIDDEN: usize = 32;

struct ClsCache {
    c1: crate::nn::Conv1dCache,
    r1: Array2<f64>,
    c2: crate::nn::Conv1dCache,
    y2: Array2<f64>,
    argmax: Vec<Vec<usize>>,
    argmin: Vec<Vec<usize>>,
    h1_in: Array2<f64>,
    h1: Array2<f64>,
    batch: usize,
}

impl ClassifierDetector {
    fn new(window_len: usize, dims: usize, rng: &mut ChaCha8Rng) -> Self {
        ClassifierDetector {
            conv1: Conv1d::new(rng, dims, CLS_C1, 3, 1, ConvDirection::Causal),
            conv2: Conv1d::new(rng, CLS_C1, CLS_C2, 3, 2, ConvDirection::Causal),
            fc1: Dense::new(rng, 3 * CLS_C2, CLS_HIDDEN),
            fc2: Dense::new(rng, CLS_HIDDEN, 1),
            window_len,
            dims,
        }
    }

    /// Forward to logits. Pooling runs over the pre-activation outputs of
    /// the second convolution so downward deviations stay visible: mean,
    /// max, and min over time per channel.
    fn forward(&self, xb: &ArrayView2<f64>, batch: usize) -> (Array2<f64>, ClsCache) {
        let t_len = self.window_len;
        let (y1, c1) = self.conv1.forward(xb, batch, t_len);
        let r1 = relu_forward(&y1.view());
        let (y2, c2) = self.conv2.forward(&r1.view(), batch, t_len);

        let mut pooled = Array2::zeros((batch, 3 * CLS_C2));
        let mut argmax = vec![vec![0usize; CLS_C2]; batch];
        let mut argmin = vec![vec![0usize; CLS_C2]; batch];
        for b in 0..batch {
            let win = y2.slice(s![b * t_len..(b + 1) * t_len, ..]);
            for c in 0..CLS_C2 {
                let col = win.column(c);
                let mut hi = (0usize, f64::NEG_INFINITY);
                let mut lo = (0usize, f64::INFINITY);
                for (t, &v) in col.iter().enumerate() {
                    if v > hi.1 {
                        hi = (t, v);
                    }
                    if v < lo.1 {
                        lo = (t, v);
                    }
                }
                pooled[[b, c]] = col.sum() / t_len as f64;
                pooled[[b, CLS_C2 + c]] = hi.1;
                pooled[[b, 2 * CLS_C2 + c]] = lo.1;
                argmax[b][c] = hi.0;
                argmin[b][c] = lo.0;
            }
        }
        let h1_in = pooled;
        let h1 = relu_forward(&self.fc1.forward(&h1_in.view()).view());
        let logits = self.fc2.forward(&h1.view());
        (
            logits,
            ClsCache {
                c1,
                r1,
                c2,
                y2,
                argmax,
                argmin,
                h1_in,
                h1,
                batch,
            },
        )
    }

    fn backward(&self, cache: &ClsCache, dlogits: &ArrayView2<f64>) -> Vec<Array2<f64>> {
        let t_len = self.window_len;
        let (dh1, dw_fc2, db_fc2) = self.fc2.backward(&cache.h1.view(), dlogits);
        let dh1 = relu_backward(&cache.h1.view(), &dh1.view());
        let (dpooled, dw_fc1, db_fc1) = self.fc1.backward(&cache.h1_in.view(), &dh1.view());

        let mut dy2 = Array2::zeros((cache.batch * t_len, CLS_C2));
        for b in 0..cache.batch {
            for c in 0..CLS_C2 {
                let dmean = dpooled[[b, c]] / t_len as f64;
                for t in 0..t_len {
                    dy2[[b * t_len + t, c]] += dmean;
                }
                dy2[[b * t_len + cache.argmax[b][c], c]] += dpooled[[b, CLS_C2 + c]];
                dy2[[b * t_len + cache.argmin[b][c], c]] += dpooled[[b, 2 * CLS_C2 + c]];
            }
        }
        let _ = &cache.y2;
        let (dr1, dw_c2, db_c2) = self.conv2.backward(&cache.c2, &dy2.view());
        let dr1 = relu_backward(&cache.r1.view(), &dr1.view());
        let (_, dw_c1, db_c1) = self.conv1.backward(&cache.c1, &dr1.view());
        vec![dw_c1, db_c1, dw_c2, db_c2, dw_fc1, db_fc1, dw_fc2, db_fc2]
    }

    fn param_refs_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![
            &mut self.conv1.w,
            &mut self.conv1.b,
            &mut self.conv2.w,
            &mut self.conv2.b,
            &mut self.fc1.w,
            &mut self.fc1.b,
            &mut self.fc2.w,
            &mut self.fc2.b,
        ]
    }

    /// Probability of anomaly for one window.
    pub fn score(&self, x: &ArrayView2<f64>) -> Result<f64> {
        if x.nrows() != self.window_len || x.ncols() != self.dims {
            return Err(GeniasError::Shape {
                expected: format!("({}, {})", self.window_len, self.dims),
                actual: format!("({}, {})", x.nrows(), x.ncols()),
            });
        }
        let (logits, _) = self.forward(x, 1);
        Ok(sigmoid(logits[[0, 0]]))
    }

    pub fn score_batch(&self, windows: &[WindowTensor]) -> Result<Vec<f64>> {
        windows.iter().map(|w| self.score(&w.data.view())).collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Train the binary window classifier on normal windows against generated
/// anomalies. Deterministic given the seed.
pub fn train_classifier_detector(
    normals: &[WindowTensor],
    anomalies: &[WindowTensor],
    seed: u64,
) -> Result<ClassifierDetector> {
    if normals.is_empty() || anomalies.is_empty() {
        return Err(GeniasError::Validation(
            "classifier needs both normal and anomalous examples".into(),
        ));
    }
    let t_len = normals[0].window_len();
    let dims = normals[0].dims();
    for w in normals.iter().chain(anomalies) {
        if w.window_len() != t_len || w.dims() != dims {
            return Err(GeniasError::Shape {
                expected: format!("({t_len}, {dims})"),
                actual: format!("({}, {})", w.window_len(), w.dims()),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cls = ClassifierDetector::new(t_len, dims, &mut rng);
    let mut optimizer = Adam::new(
        &cls.param_refs_mut()
            .iter()
            .map(|p| (p.nrows(), p.ncols()))
            .collect::<Vec<_>>(),
    );

    let mut examples: Vec<(&WindowTensor, f64)> = Vec::new();
    examples.extend(normals.iter().map(|w| (w, 0.0)));
    examples.extend(anomalies.iter().map(|w| (w, 1.0)));

    let epochs = 60;
    let batch_size = 32.min(examples.len());
    let jitter = 0.02;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let b = chunk.len();
            let mut xb = Array2::zeros((b * t_len, dims));
            let mut targets = Array2::zeros((b, 1));
            for (i, &idx) in chunk.iter().enumerate() {
                xb.slice_mut(s![i * t_len..(i + 1) * t_len, ..])
                    .assign(&examples[idx].0.data);
                targets[[i, 0]] = examples[idx].1;
            }
            // Light input jitter keeps the boundary from keying on exact
            // values of either class.
            let noise = crate::nn::standard_normal(&mut rng, b * t_len, dims);
            xb = xb + noise * jitter;
            let (logits, cache) = cls.forward(&xb.view(), b);
            // Binary cross-entropy with logits.
            let dlogits = Array2::from_shape_fn((b, 1), |(i, _)| {
                (sigmoid(logits[[i, 0]]) - targets[[i, 0]]) / b as f64
            });
            let grads = cls.backward(&cache, &dlogits.view());
            let mut grads = grads;
            crate::nn::clip_global_norm(&mut grads, 5.0);
            let mut params = cls.param_refs_mut();
            optimizer.step(&mut params, &grads, 1e-3);
        }
    }
    Ok(cls)
}
