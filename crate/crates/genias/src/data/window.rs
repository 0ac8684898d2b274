//! Fixed-length windows sliced from a series.

use ndarray::Array2;

use crate::data::RawSeries;
use crate::error::{GeniasError, Result};

/// One T x D slice of a series, the model's unit of processing.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTensor {
    /// Shape (T, D).
    pub data: Array2<f64>,
    /// (series name, start index) this window was cut from.
    pub origin: (String, usize),
    /// Set when the window covers at least one labeled-anomalous timestep.
    pub label: Option<bool>,
}

impl WindowTensor {
    pub fn new(data: Array2<f64>, origin: (String, usize), label: Option<bool>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GeniasError::Validation(format!(
                "window from {}@{} contains non-finite values",
                origin.0, origin.1
            )));
        }
        Ok(WindowTensor { data, origin, label })
    }

    pub fn window_len(&self) -> usize {
        self.data.nrows()
    }

    pub fn dims(&self) -> usize {
        self.data.ncols()
    }
}

/// Slice `series` into windows of length `window_len` advancing by `stride`.
///
/// Window i covers timesteps [i*stride, i*stride + window_len); its label is
/// 1 iff any covered timestep is labeled 1.
pub fn make_windows(
    series: &RawSeries,
    window_len: usize,
    stride: usize,
) -> Result<Vec<WindowTensor>> {
    if window_len == 0 || stride == 0 {
        return Err(GeniasError::Param(
            "window length and stride must be positive".into(),
        ));
    }
    let n = series.len();
    if window_len > n {
        return Err(GeniasError::Validation(format!(
            "window length {window_len} exceeds series length {n}"
        )));
    }
    let count = (n - window_len) / stride + 1;
    let mut windows = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * stride;
        let data = series
            .values
            .slice(ndarray::s![start..start + window_len, ..])
            .to_owned();
        let label = series
            .labels
            .as_ref()
            .map(|l| l[start..start + window_len].iter().any(|&v| v == 1));
        windows.push(WindowTensor {
            data,
            origin: (series.name.clone(), start),
            label,
        });
    }
    Ok(windows)
}

/// Indices of dimensions that are identically zero across the window.
pub fn zero_dims(window: &WindowTensor) -> Vec<usize> {
    (0..window.dims())
        .filter(|&d| window.data.column(d).iter().all(|&v| v == 0.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn series(n: usize, labels: Option<Vec<u8>>) -> RawSeries {
        let values = Array2::from_shape_fn((n, 2), |(t, d)| (t * 2 + d) as f64);
        RawSeries::new(values, labels, "s").unwrap()
    }

    #[test]
    fn single_window_covers_everything() {
        let w = make_windows(&series(10, None), 10, 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].origin.1, 0);
        assert_eq!(w[0].window_len(), 10);
    }

    #[test]
    fn stride_two_enumeration() {
        // N=10, T=4, stride=2: starts 0, 2, 4, 6.
        let w = make_windows(&series(10, None), 4, 2).unwrap();
        let starts: Vec<usize> = w.iter().map(|w| w.origin.1).collect();
        assert_eq!(starts, vec![0, 2, 4, 6]);
    }

    #[test]
    fn window_too_long_rejected() {
        assert!(make_windows(&series(5, None), 6, 1).is_err());
    }

    #[test]
    fn labels_propagate_by_any_rule() {
        let mut labels = vec![0u8; 10];
        labels[5] = 1;
        let w = make_windows(&series(10, Some(labels)), 4, 2).unwrap();
        let flags: Vec<bool> = w.iter().map(|w| w.label.unwrap()).collect();
        // Starts 0,2,4,6; timestep 5 falls into windows starting at 2 and 4.
        assert_eq!(flags, vec![false, true, true, false]);
    }

    #[test]
    fn all_zero_labels_stay_zero() {
        let w = make_windows(&series(10, Some(vec![0; 10])), 4, 2).unwrap();
        assert!(w.iter().all(|w| w.label == Some(false)));
    }

    #[test]
    fn stride_one_is_lossless_over_starts() {
        let n = 23;
        let t = 5;
        let w = make_windows(&series(n, None), t, 1).unwrap();
        let starts: Vec<usize> = w.iter().map(|w| w.origin.1).collect();
        assert_eq!(starts, (0..=n - t).collect::<Vec<_>>());
    }

    #[test]
    fn zero_dims_cases() {
        let all_zero = WindowTensor::new(Array2::zeros((4, 3)), ("z".into(), 0), None).unwrap();
        assert_eq!(zero_dims(&all_zero), vec![0, 1, 2]);

        let none = WindowTensor::new(array![[1.0, 2.0], [3.0, 4.0]], ("n".into(), 0), None).unwrap();
        assert!(zero_dims(&none).is_empty());

        let mixed =
            WindowTensor::new(array![[1.0, 0.0], [0.0, 0.0]], ("m".into(), 0), None).unwrap();
        assert_eq!(zero_dims(&mixed), vec![1]);
    }
}
