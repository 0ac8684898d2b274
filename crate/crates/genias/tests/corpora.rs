//! The bundled corpora are exact, seeded artifacts: regenerating them from
//! their recorded seeds must reproduce the committed files.

use std::path::{Path, PathBuf};

use genias::data::{load_series, synth_normal, SeriesFormat, SynthKind};

fn corpus_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpora").join(name)
}

#[test]
fn train_corpus_matches_generator_seeds() {
    let series = load_series(&corpus_path("sine_train.csv"), SeriesFormat::Csv).unwrap();
    assert_eq!(series.dims(), 1);
    assert_eq!(series.len(), 160 * 64);
    let expected = synth_normal(SynthKind::SineMix, 64, 1, 160, 20_240_001).unwrap();
    for (i, w) in expected.iter().enumerate() {
        let slice = series.values.slice(ndarray::s![i * 64..(i + 1) * 64, ..]);
        assert_eq!(slice, w.data, "window {i} diverges from the seeded generator");
    }
}

#[test]
fn test_corpus_has_balanced_window_labels() {
    let series = load_series(&corpus_path("sine_test.csv"), SeriesFormat::Csv).unwrap();
    let labels = series.labels.as_ref().expect("labels shipped");
    assert_eq!(series.len(), 120 * 64);
    // First 60 windows normal, last 60 anomalous, label constant per window.
    for w in 0..120 {
        let slice = &labels[w * 64..(w + 1) * 64];
        let expected = u8::from(w >= 60);
        assert!(slice.iter().all(|&l| l == expected), "window {w} labels mixed");
    }
}

#[test]
fn secondary_corpora_shapes() {
    let ar = load_series(&corpus_path("ar_train.csv"), SeriesFormat::Csv).unwrap();
    assert_eq!((ar.len(), ar.dims()), (80 * 64, 1));
    let mts = load_series(&corpus_path("mts_train.csv"), SeriesFormat::Csv).unwrap();
    assert_eq!((mts.len(), mts.dims()), (80 * 64, 3));
    assert!(mts.values.column(2).iter().all(|&v| v == 0.0));
}
