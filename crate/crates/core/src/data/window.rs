use serde::{Deserialize, Serialize};

use super::{StationSeries, WindowedSample};
use crate::error::{Error, Result};

/// Slides a window of `window` rows over the series; sample `k` sees rows
/// `[k, k+window)` and targets row `k+window`. Yields `N − window` samples.
pub fn make_windows(series: &StationSeries, window: usize, target_idx: &[usize]) -> Result<Vec<WindowedSample>> {
    if window == 0 {
        return Err(Error::Config("window length must be >= 1".into()));
    }
    if target_idx.is_empty() || target_idx.iter().any(|&i| i >= series.n_features()) {
        return Err(Error::Config(format!("invalid target indices {target_idx:?}")));
    }
    let rows = series.rows();
    if rows.len() <= window {
        return Err(Error::InsufficientData {
            rows: rows.len(),
            window,
        });
    }
    Ok((0..rows.len() - window)
        .map(|k| WindowedSample {
            x: rows[k..k + window].to_vec(),
            y: target_idx.iter().map(|&i| rows[k + window][i]).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Config(format!("split ratios must be positive: {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1: {parts:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Split<T> {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Contiguous train/val/test partition in time order. Train and val sizes
/// are floor-rounded; the remainder goes to test.
pub fn chronological_split<T: Clone>(samples: &[T], ratios: SplitRatios) -> Result<Split<T>> {
    ratios.validate()?;
    let n = samples.len();
    // The epsilon absorbs products such as 0.29·100 landing just below 29.
    let floor = |r: f64| ((n as f64 * r) + 1e-9).floor() as usize;
    let n_train = floor(ratios.train).min(n);
    let n_val = floor(ratios.val).min(n - n_train);
    Ok(Split {
        train: samples[..n_train].to_vec(),
        val: samples[n_train..n_train + n_val].to_vec(),
        test: samples[n_train + n_val..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::{RawRecord, N_FEATURES};
    use super::*;
    use proptest::prelude::*;

    fn toy(n: usize) -> StationSeries {
        let records = (0..n)
            .map(|i| {
                let mut f = [0.0; N_FEATURES];
                for (j, v) in f.iter_mut().enumerate() {
                    *v = (i * 100 + j) as f64;
                }
                RawRecord {
                    timestamp: i as i64 * 120,
                    features: f,
                }
            })
            .collect();
        StationSeries::new("toy", 120, records).unwrap()
    }

    #[test]
    fn five_rows_window_two() {
        let w = make_windows(&toy(5), 2, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].y, vec![200.0, 201.0, 202.0, 203.0, 204.0]);
        assert_eq!(w[0].x[0][0], 0.0);
        assert_eq!(w[0].x[1][0], 100.0);
        assert_eq!(w[2].y[0], 400.0);
    }

    #[test]
    fn window_equal_to_length_is_insufficient() {
        assert!(matches!(
            make_windows(&toy(3), 3, &[0]),
            Err(Error::InsufficientData { rows: 3, window: 3 })
        ));
    }

    #[test]
    fn one_extra_row_gives_one_sample() {
        assert_eq!(make_windows(&toy(8), 7, &[0]).unwrap().len(), 1);
    }

    #[test]
    fn split_sizes() {
        let v: Vec<usize> = (0..10).collect();
        assert_eq!(chronological_split(&v, SplitRatios::default()).unwrap().sizes(), (6, 2, 2));
        let v: Vec<usize> = (0..7).collect();
        assert_eq!(chronological_split(&v, SplitRatios::default()).unwrap().sizes(), (4, 1, 2));
    }

    #[test]
    fn bad_ratios_are_config_errors() {
        let v = [1, 2, 3];
        let r = SplitRatios { train: 0.5, val: 0.5, test: 0.5 };
        assert!(matches!(chronological_split(&v, r), Err(Error::Config(_))));
        let r = SplitRatios { train: 1.0, val: 0.0, test: 0.0 };
        assert!(matches!(chronological_split(&v, r), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn window_count_is_n_minus_s(n in 2usize..60, s in 1usize..30) {
            prop_assume!(n > s);
            prop_assert_eq!(make_windows(&toy(n), s, &[0, 4]).unwrap().len(), n - s);
        }

        #[test]
        fn split_concatenation_is_identity(n in 0usize..500, a in 0.05f64..0.9) {
            let b = (1.0 - a) * 0.5;
            let r = SplitRatios { train: a, val: b, test: 1.0 - a - b };
            let v: Vec<usize> = (0..n).collect();
            let s = chronological_split(&v, r).unwrap();
            let joined: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            prop_assert_eq!(joined, v);
        }
    }
}
