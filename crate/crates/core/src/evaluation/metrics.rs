use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// RMSE over the grand target mean; `None` when that mean is zero.
    pub nrmse: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub mse: f64,
    /// Number of evaluated steps.
    pub steps: usize,
    /// Targets per step.
    pub targets: usize,
}

/// Error metrics over `steps × targets` predictions on the original scale.
pub fn metrics(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<MetricsReport> {
    if predictions.is_empty() {
        return Err(Error::Contract("metrics need at least one step".into()));
    }
    if predictions.len() != targets.len() {
        return Err(Error::shape("metrics", &[predictions.len()], &[targets.len()]));
    }
    let width = targets[0].len();
    let (mut sq, mut abs, mut sum) = (0.0, 0.0, 0.0);
    for (p, t) in predictions.iter().zip(targets) {
        if p.len() != width || t.len() != width {
            return Err(Error::shape("metrics", &[p.len()], &[t.len()]));
        }
        for (&pv, &tv) in p.iter().zip(t) {
            let e = pv - tv;
            sq += e * e;
            abs += e.abs();
            sum += tv;
        }
    }
    let n = (predictions.len() * width) as f64;
    if n == 0.0 {
        return Err(Error::Contract("metrics need at least one target".into()));
    }
    let mse = sq / n;
    let rmse = mse.sqrt();
    let mean = sum / n;
    Ok(MetricsReport {
        nrmse: (mean != 0.0).then(|| rmse / mean),
        mae: abs / n,
        rmse,
        mse,
        steps: predictions.len(),
        targets: width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_zero_error() {
        let t = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let m = metrics(&t, &t).unwrap();
        assert_eq!((m.nrmse, m.mae, m.rmse, m.mse), (Some(0.0), 0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_case() {
        let m = metrics(&[vec![2.0], vec![2.0]], &[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!((m.mse, m.rmse, m.mae, m.nrmse), (1.0, 1.0, 1.0, Some(0.5)));
    }

    #[test]
    fn zero_mean_leaves_nrmse_undefined() {
        let m = metrics(&[vec![1.0], vec![0.0]], &[vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(m.nrmse, None);
        assert!((m.mse - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nrmse_is_scale_invariant() {
        let p = vec![vec![1.5, 2.5], vec![0.2, 4.0]];
        let t = vec![vec![1.0, 3.0], vec![0.5, 3.5]];
        let k = 7.25;
        let scale = |v: &[Vec<f64>]| v.iter().map(|r| r.iter().map(|x| x * k).collect()).collect::<Vec<Vec<f64>>>();
        let a = metrics(&p, &t).unwrap();
        let b = metrics(&scale(&p), &scale(&t)).unwrap();
        assert!((a.nrmse.unwrap() - b.nrmse.unwrap()).abs() < 1e-12);
        assert!((b.rmse - k * a.rmse).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_errors() {
        assert!(metrics(&[vec![1.0]], &[vec![1.0, 2.0]]).is_err());
        assert!(metrics(&[], &[]).is_err());
    }
}
