//! Property tests for the cross-cutting invariants: windowing coverage,
//! normalization behavior, patch composition, hinge structure, and metric
//! invariances.

use ndarray::Array2;
use proptest::prelude::*;

use genias::data::{
    apply_normalizer, fit_normalizer, make_windows, zero_dims, RawSeries, WindowTensor,
};
use genias::injector::deviation_patch;
use genias::objectives::perturb_loss;
use genias::tsad::{detection_metrics, ScoredWindows};

fn window(data: Array2<f64>) -> WindowTensor {
    WindowTensor::new(data, ("prop".into(), 0), None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_count_and_coverage(
        n in 4usize..200,
        t_len in 1usize..20,
        stride in 1usize..10,
    ) {
        prop_assume!(t_len <= n);
        let series = RawSeries::new(
            Array2::from_shape_fn((n, 1), |(i, _)| i as f64),
            None,
            "s",
        ).unwrap();
        let windows = make_windows(&series, t_len, stride).unwrap();
        prop_assert_eq!(windows.len(), (n - t_len) / stride + 1);
        for (i, w) in windows.iter().enumerate() {
            prop_assert_eq!(w.origin.1, i * stride);
            // Window content is the exact slice: first cell equals its
            // start index by construction.
            prop_assert_eq!(w.data[[0, 0]], (i * stride) as f64);
        }
        // Stride 1 enumerates every feasible start exactly once.
        if stride == 1 {
            prop_assert_eq!(windows.len(), n - t_len + 1);
        }
    }

    #[test]
    fn normalization_idempotence_and_range(
        values in proptest::collection::vec(-1e3f64..1e3, 8..64),
    ) {
        let n = values.len();
        let data = Array2::from_shape_vec((n, 1), values).unwrap();
        let ws = vec![window(data)];
        let stats = fit_normalizer(&ws).unwrap();
        let once = apply_normalizer(&ws, &stats).unwrap();
        for v in once[0].data.iter() {
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(v));
        }
        // Refitting on normalized output yields min 0 / max 1 (or a constant
        // dimension), and applying again changes nothing.
        let stats2 = fit_normalizer(&once).unwrap();
        let twice = apply_normalizer(&once, &stats2).unwrap();
        for (a, b) in twice[0].data.iter().zip(once[0].data.iter()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn zero_dims_stable_under_normalization(
        values in proptest::collection::vec(0f64..10.0, 16),
    ) {
        // Dimension 0 carries data with min 0, dimension 1 is identically 0.
        let mut data = Array2::zeros((17, 2));
        for (i, v) in values.iter().enumerate() {
            data[[i + 1, 0]] = *v; // row 0 stays 0 so the min is 0
        }
        let ws = vec![window(data)];
        let before = zero_dims(&ws[0]);
        let stats = fit_normalizer(&ws).unwrap();
        let after = zero_dims(&apply_normalizer(&ws, &stats).unwrap()[0]);
        // Zero stays zero when min <= 0 <= max, so the zero set is stable.
        prop_assert!(after.contains(&1));
        prop_assert_eq!(before.contains(&0), after.contains(&0));
    }

    #[test]
    fn patch_composition_and_monotonicity(
        x_vals in proptest::collection::vec(0f64..1.0, 24),
        xt_vals in proptest::collection::vec(0f64..1.0, 24),
        tau1 in 0f64..0.5,
        dtau in 0f64..0.5,
    ) {
        let x = Array2::from_shape_vec((12, 2), x_vals).unwrap();
        let xt = Array2::from_shape_vec((12, 2), xt_vals).unwrap();
        let tau2 = tau1 + dtau;
        let p1 = deviation_patch(&x.view(), &xt.view(), tau1).unwrap();
        let p2 = deviation_patch(&x.view(), &xt.view(), tau2).unwrap();
        for ((t, d), v) in p1.data.data.indexed_iter() {
            let expected = if p1.mask[[t, d]] == 1 { xt[[t, d]] } else { x[[t, d]] };
            prop_assert_eq!(*v, expected);
        }
        // Larger tau can only shrink the mask.
        for (a, b) in p1.mask.iter().zip(p2.mask.iter()) {
            prop_assert!(a >= b);
        }
    }

    #[test]
    fn auroc_invariant_and_bounded(
        scores in proptest::collection::vec(-10f64..10.0, 12..80),
        flip in proptest::collection::vec(any::<bool>(), 12..80),
    ) {
        let n = scores.len().min(flip.len());
        let scores = &scores[..n];
        let mut labels: Vec<u8> = flip[..n].iter().map(|&b| u8::from(b)).collect();
        if labels.iter().all(|&l| l == 0) { labels[0] = 1; }
        if labels.iter().all(|&l| l == 1) { labels[0] = 0; }
        let base = detection_metrics(
            &ScoredWindows::new(scores.to_vec(), labels.clone()).unwrap(),
        ).unwrap();
        prop_assert!((0.0..=1.0).contains(&base.auroc));
        prop_assert!((0.0..=1.0).contains(&base.best_f1));
        prop_assert!(base.aupr <= 1.0 + 1e-12);
        // Strictly increasing transforms cannot change rank metrics.
        let warped: Vec<f64> = scores.iter().map(|s| s.mul_add(2.0, 0.0).tanh() * 5.0 + s / 100.0).collect();
        let after = detection_metrics(&ScoredWindows::new(warped, labels).unwrap()).unwrap();
        prop_assert!((base.auroc - after.auroc).abs() <= 1e-12);
        prop_assert!((base.best_f1 - after.best_f1).abs() <= 1e-12);
    }
}

#[test]
fn hinge_structure_of_perturbation_loss() {
    // Fix d(X, Xhat) = 0.04 and margins (0.1, 0.2); sweep d(X, Xtilde).
    let t_len = 4;
    let x = Array2::zeros((t_len, 1));
    let make = |dist: f64| Array2::from_elem((t_len, 1), dist.sqrt());
    let xhat = make(0.04);
    let (dmin, dmax) = (0.1, 0.2);

    let loss_at = |d_tilde: f64| {
        let xt = make(d_tilde);
        perturb_loss(&[x.view()], &[xhat.view()], &[xt.view()], dmin, dmax).unwrap()
    };

    // First hinge active below d_hat + delta_min = 0.14: nonincreasing.
    let mut prev = f64::INFINITY;
    for d in [0.0, 0.03, 0.06, 0.09, 0.12] {
        let v = loss_at(d);
        assert!(v <= prev);
        assert!(v > 0.0);
        prev = v;
    }
    // Dead zone [0.14, 0.2]: exactly zero.
    for d in [0.15, 0.17, 0.19] {
        assert_eq!(loss_at(d), 0.0);
    }
    // Second hinge active above delta_max: nondecreasing.
    let mut prev = 0.0;
    for d in [0.21, 0.3, 0.5, 1.0] {
        let v = loss_at(d);
        assert!(v >= prev);
        prev = v;
    }
}

#[test]
fn random_scorer_aupr_tracks_prevalence() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let n = 10_000;
    let prevalence = 0.3;
    let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(prevalence))).collect();
    let m = detection_metrics(&ScoredWindows::new(scores, labels).unwrap()).unwrap();
    assert!(
        (m.aupr - prevalence).abs() < 0.05,
        "random-scorer AUPR {} should sit near prevalence {prevalence}",
        m.aupr
    );
}
