use serde::{Deserialize, Serialize};

use super::{FeatureRow, WindowedSample, N_FEATURES};
use crate::error::{Error, Result};

/// Per-feature min-max statistics fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: FeatureRow,
    pub max: FeatureRow,
    pub targets: Vec<usize>,
    pub fitted_on: String,
}

/// Fits min/max over every window row and target value of `train`.
pub fn fit_normalizer(train: &[WindowedSample], targets: &[usize]) -> Result<NormStats> {
    if train.is_empty() {
        return Err(Error::Config("cannot fit a normalizer on an empty training split".into()));
    }
    if train.iter().any(|s| s.y.len() != targets.len()) {
        return Err(Error::Config("target indices do not match sample targets".into()));
    }
    let mut min = [f64::INFINITY; N_FEATURES];
    let mut max = [f64::NEG_INFINITY; N_FEATURES];
    let mut see = |i: usize, v: f64| {
        min[i] = min[i].min(v);
        max[i] = max[i].max(v);
    };
    for s in train {
        for row in &s.x {
            for (i, &v) in row.iter().enumerate() {
                see(i, v);
            }
        }
        for (&i, &v) in targets.iter().zip(&s.y) {
            see(i, v);
        }
    }
    Ok(NormStats {
        min,
        max,
        targets: targets.to_vec(),
        fitted_on: "train".into(),
    })
}

impl NormStats {
    fn range(&self, i: usize) -> f64 {
        self.max[i] - self.min[i]
    }

    pub fn scale(&self, feature: usize, v: f64) -> f64 {
        let r = self.range(feature);
        if r > 0.0 {
            (v - self.min[feature]) / r
        } else {
            0.0
        }
    }

    /// Inverse of [`NormStats::scale`]; constant features map back to their value.
    pub fn unscale(&self, feature: usize, v: f64) -> f64 {
        let r = self.range(feature);
        if r > 0.0 {
            v * r + self.min[feature]
        } else {
            self.min[feature]
        }
    }

    pub fn apply(&self, samples: &[WindowedSample]) -> Vec<WindowedSample> {
        samples
            .iter()
            .map(|s| WindowedSample {
                x: s.x
                    .iter()
                    .map(|row| std::array::from_fn(|i| self.scale(i, row[i])))
                    .collect(),
                y: self.targets.iter().zip(&s.y).map(|(&i, &v)| self.scale(i, v)).collect(),
            })
            .collect()
    }

    pub fn invert(&self, samples: &[WindowedSample]) -> Vec<WindowedSample> {
        samples
            .iter()
            .map(|s| WindowedSample {
                x: s.x
                    .iter()
                    .map(|row| std::array::from_fn(|i| self.unscale(i, row[i])))
                    .collect(),
                y: self.denormalize_targets(&s.y),
            })
            .collect()
    }

    /// Maps a normalized target vector (ordered as `targets`) back to the
    /// original scale.
    pub fn denormalize_targets(&self, y: &[f64]) -> Vec<f64> {
        self.targets.iter().zip(y).map(|(&i, &v)| self.unscale(i, v)).collect()
    }
}
