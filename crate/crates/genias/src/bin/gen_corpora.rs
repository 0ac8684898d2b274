//! Regenerate the bundled synthetic corpora under corpora/.
//!
//! The files are committed so every test and pipeline run works offline;
//! this tool exists to rebuild them from their fixed seeds. The layout and
//! seeds are asserted by the corpora integration test.

use ndarray::Array2;

use genias::data::{
    save_series_csv, synth_inject, synth_normal, AnomalyKind, RawSeries, SynthKind, WindowTensor,
};

pub const WINDOW_LEN: usize = 64;
pub const TRAIN_WINDOWS: usize = 160;
pub const TEST_NORMAL: usize = 60;
pub const TEST_ANOMALOUS: usize = 60;
pub const TRAIN_SEED: u64 = 20_240_001;
pub const TEST_SEED: u64 = 20_240_002;
pub const INJECT_SEED: u64 = 20_240_003;
pub const ORACLE_MAGNITUDE: f64 = 0.6;

fn windows_to_series(
    windows: &[WindowTensor],
    labels: Option<&[u8]>,
    name: &str,
) -> RawSeries {
    let t_len = windows[0].window_len();
    let dims = windows[0].dims();
    let mut values = Array2::zeros((windows.len() * t_len, dims));
    for (i, w) in windows.iter().enumerate() {
        values
            .slice_mut(ndarray::s![i * t_len..(i + 1) * t_len, ..])
            .assign(&w.data);
    }
    // Window-level labels expand to their covered timesteps.
    let expanded = labels.map(|ls| {
        ls.iter()
            .flat_map(|&l| std::iter::repeat(l).take(t_len))
            .collect::<Vec<u8>>()
    });
    RawSeries::new(values, expanded, name).expect("synthetic series is valid")
}

fn main() {
    let out = std::path::Path::new("corpora");
    std::fs::create_dir_all(out).expect("create corpora dir");

    // Training corpus: smooth seeded sine mixtures.
    let train = synth_normal(SynthKind::SineMix, WINDOW_LEN, 1, TRAIN_WINDOWS, TRAIN_SEED)
        .expect("generate train windows");
    save_series_csv(&windows_to_series(&train, None, "sine_train"), &out.join("sine_train.csv"))
        .expect("write sine_train.csv");

    // Test corpus: held-out normals plus oracle-injected anomalies
    // (alternating spikes and level shifts), window-aligned labels.
    let test_normals = synth_normal(
        SynthKind::SineMix,
        WINDOW_LEN,
        1,
        TEST_NORMAL + TEST_ANOMALOUS,
        TEST_SEED,
    )
    .expect("generate test windows");
    let (spikes, _) = synth_inject(
        &test_normals[TEST_NORMAL..TEST_NORMAL + TEST_ANOMALOUS / 2],
        AnomalyKind::Spike,
        ORACLE_MAGNITUDE,
        INJECT_SEED,
    )
    .expect("inject spikes");
    let (shifts, _) = synth_inject(
        &test_normals[TEST_NORMAL + TEST_ANOMALOUS / 2..],
        AnomalyKind::LevelShift,
        ORACLE_MAGNITUDE,
        INJECT_SEED + 1,
    )
    .expect("inject level shifts");

    let mut test_windows: Vec<WindowTensor> = test_normals[..TEST_NORMAL].to_vec();
    test_windows.extend(spikes);
    test_windows.extend(shifts);
    let mut labels = vec![0u8; TEST_NORMAL];
    labels.extend(vec![1u8; TEST_ANOMALOUS]);
    save_series_csv(
        &windows_to_series(&test_windows, Some(&labels), "sine_test"),
        &out.join("sine_test.csv"),
    )
    .expect("write sine_test.csv");

    // Secondary corpora: an autoregressive univariate set and a
    // multivariate set with an identically-zero dimension.
    let ar = synth_normal(SynthKind::ArProcess, WINDOW_LEN, 1, 80, TRAIN_SEED + 10)
        .expect("generate ar windows");
    save_series_csv(&windows_to_series(&ar, None, "ar_train"), &out.join("ar_train.csv"))
        .expect("write ar_train.csv");

    let mts_base = synth_normal(SynthKind::SineMix, WINDOW_LEN, 2, 80, TRAIN_SEED + 20)
        .expect("generate mts windows");
    let mts: Vec<WindowTensor> = mts_base
        .iter()
        .map(|w| {
            let mut data = Array2::zeros((WINDOW_LEN, 3));
            data.slice_mut(ndarray::s![.., ..2]).assign(&w.data);
            WindowTensor::new(data, w.origin.clone(), w.label).unwrap()
        })
        .collect();
    save_series_csv(&windows_to_series(&mts, None, "mts_train"), &out.join("mts_train.csv"))
        .expect("write mts_train.csv");

    println!("corpora written to {}", out.display());
}
