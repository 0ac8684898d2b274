//! Ingestion, windowing, normalization, and synthetic corpora.

mod normalize;
mod series;
mod synth;
mod window;

pub use normalize::{apply_normalizer, fit_normalizer, invert_normalizer, NormStats};
pub use series::{load_series, save_series_binary, save_series_csv, RawSeries, SeriesFormat};
pub use synth::{synth_inject, synth_normal, AnomalyKind, SynthKind};
pub use window::{make_windows, zero_dims, WindowTensor};
