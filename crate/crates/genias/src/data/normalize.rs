//! Per-dimension min-max normalization fit on training windows only.
//!
//! Constant dimensions (max == min) map to 0 so that identically-zero
//! dimensions keep their zero-dimension semantics.

use ndarray::Array1;

use crate::data::WindowTensor;
use crate::error::{GeniasError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub min: Array1<f64>,
    pub max: Array1<f64>,
}

impl NormStats {
    pub fn dims(&self) -> usize {
        self.min.len()
    }
}

/// Compute per-dimension min/max over every cell of the training windows.
pub fn fit_normalizer(train_windows: &[WindowTensor]) -> Result<NormStats> {
    let first = train_windows
        .first()
        .ok_or_else(|| GeniasError::Validation("cannot fit normalizer on zero windows".into()))?;
    let d = first.dims();
    let mut min = Array1::from_elem(d, f64::INFINITY);
    let mut max = Array1::from_elem(d, f64::NEG_INFINITY);
    for w in train_windows {
        if w.dims() != d {
            return Err(GeniasError::Shape {
                expected: format!("{d} dims"),
                actual: format!("{} dims", w.dims()),
            });
        }
        for (idx, v) in w.data.indexed_iter() {
            let (_, dim) = idx;
            if *v < min[dim] {
                min[dim] = *v;
            }
            if *v > max[dim] {
                max[dim] = *v;
            }
        }
    }
    Ok(NormStats { min, max })
}

/// Map every cell to (x - min) / (max - min); constant dimensions go to 0.
pub fn apply_normalizer(windows: &[WindowTensor], stats: &NormStats) -> Result<Vec<WindowTensor>> {
    windows
        .iter()
        .map(|w| {
            if w.dims() != stats.dims() {
                return Err(GeniasError::Shape {
                    expected: format!("{} dims", stats.dims()),
                    actual: format!("{} dims", w.dims()),
                });
            }
            let mut data = w.data.clone();
            for ((_, d), v) in data.indexed_iter_mut() {
                let range = stats.max[d] - stats.min[d];
                *v = if range == 0.0 {
                    0.0
                } else {
                    (*v - stats.min[d]) / range
                };
            }
            Ok(WindowTensor {
                data,
                origin: w.origin.clone(),
                label: w.label,
            })
        })
        .collect()
}

/// Undo [`apply_normalizer`]. Constant dimensions recover their min value.
pub fn invert_normalizer(windows: &[WindowTensor], stats: &NormStats) -> Result<Vec<WindowTensor>> {
    windows
        .iter()
        .map(|w| {
            if w.dims() != stats.dims() {
                return Err(GeniasError::Shape {
                    expected: format!("{} dims", stats.dims()),
                    actual: format!("{} dims", w.dims()),
                });
            }
            let mut data = w.data.clone();
            for ((_, d), v) in data.indexed_iter_mut() {
                let range = stats.max[d] - stats.min[d];
                *v = if range == 0.0 {
                    stats.min[d]
                } else {
                    *v * range + stats.min[d]
                };
            }
            Ok(WindowTensor {
                data,
                origin: w.origin.clone(),
                label: w.label,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn win(data: ndarray::Array2<f64>) -> WindowTensor {
        WindowTensor::new(data, ("t".into(), 0), None).unwrap()
    }

    #[test]
    fn midpoint_maps_to_half() {
        // Dimension spanning [2, 6]: 4 -> 0.5.
        let ws = vec![win(array![[2.0], [6.0], [4.0]])];
        let stats = fit_normalizer(&ws).unwrap();
        let out = apply_normalizer(&ws, &stats).unwrap();
        assert_eq!(out[0].data[[2, 0]], 0.5);
        assert_eq!(out[0].data[[0, 0]], 0.0);
        assert_eq!(out[0].data[[1, 0]], 1.0);
    }

    #[test]
    fn constant_dimension_goes_to_zero() {
        let ws = vec![win(array![[3.0, 1.0], [3.0, 2.0]])];
        let stats = fit_normalizer(&ws).unwrap();
        let out = apply_normalizer(&ws, &stats).unwrap();
        assert!(out[0].data.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fitting_set_lands_in_unit_interval() {
        let ws = vec![
            win(array![[-5.0, 10.0], [2.0, -3.0]]),
            win(array![[7.0, 0.0], [1.0, 4.0]]),
        ];
        let stats = fit_normalizer(&ws).unwrap();
        let out = apply_normalizer(&ws, &stats).unwrap();
        for w in &out {
            assert!(w.data.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn round_trip_within_tolerance() {
        let ws = vec![win(array![[-5.0, 10.0], [2.0, -3.0], [0.5, 0.25]])];
        let stats = fit_normalizer(&ws).unwrap();
        let back = invert_normalizer(&apply_normalizer(&ws, &stats).unwrap(), &stats).unwrap();
        for (a, b) in back[0].data.iter().zip(ws[0].data.iter()) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let ws = vec![win(array![[1.0], [2.0]])];
        let stats = fit_normalizer(&ws).unwrap();
        let other = vec![win(array![[1.0, 2.0]])];
        assert!(apply_normalizer(&other, &stats).is_err());
    }

    #[test]
    fn empty_fit_rejected() {
        assert!(fit_normalizer(&[]).is_err());
    }

    #[test]
    fn zero_preserved_when_range_spans_zero() {
        let ws = vec![win(array![[0.0, 0.0], [1.0, 5.0]])];
        let stats = fit_normalizer(&ws).unwrap();
        let out = apply_normalizer(&ws, &stats).unwrap();
        assert_eq!(out[0].data[[0, 0]], 0.0);
        assert_eq!(out[0].data[[0, 1]], 0.0);
    }
}
