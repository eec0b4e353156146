//! Fixed random reservoir with a trained linear readout.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 10_000;
const POWER_BLOCK: usize = 8;

/// Reservoir weights. `w_in` is `n_r × d` and `w` is `n_r × n_r`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    n_r: usize,
    d: usize,
    w_in: Vec<f64>,
    w: Vec<f64>,
    leak: f64,
    rho_target: f64,
    seed: u64,
}

impl Reservoir {
    /// Build from explicit matrices (no rescaling).
    pub fn from_parts(n_r: usize, d: usize, w_in: Vec<f64>, w: Vec<f64>, leak: f64) -> Result<Self> {
        if w_in.len() != n_r * d {
            return Err(Error::shape("reservoir w_in", &[w_in.len()], &[n_r, d]));
        }
        if w.len() != n_r * n_r {
            return Err(Error::shape("reservoir w", &[w.len()], &[n_r, n_r]));
        }
        check_leak(leak)?;
        let rho = if n_r == 0 { 0.0 } else { spectral_radius(&w, n_r)? };
        Ok(Self { n_r, d, w_in, w, leak, rho_target: rho, seed: 0 })
    }

    pub fn size(&self) -> usize {
        self.n_r
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn rho_target(&self) -> f64 {
        self.rho_target
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn w_in(&self) -> &[f64] {
        &self.w_in
    }

    pub fn zero_state(&self) -> Vec<f64> {
        vec![0.0; self.n_r]
    }

    /// Multiply-accumulates for one step.
    pub fn step_macs(&self) -> u64 {
        (self.n_r * (self.d + self.n_r)) as u64
    }
}

fn check_leak(leak: f64) -> Result<()> {
    if !(leak > 0.0 && leak <= 1.0) {
        return Err(Error::Parameter(format!("leak must lie in (0,1], got {leak}")));
    }
    Ok(())
}

/// Sample a reservoir and rescale `W` to spectral radius `rho_target`.
pub fn esn_init(seed: u64, n_r: usize, rho_target: f64, input_scale: f64, leak: f64) -> Result<Reservoir> {
    esn_init_with_inputs(seed, n_r, 1, rho_target, input_scale, leak)
}

/// As [`esn_init`] with a `d`-dimensional input.
pub fn esn_init_with_inputs(
    seed: u64,
    n_r: usize,
    d: usize,
    rho_target: f64,
    input_scale: f64,
    leak: f64,
) -> Result<Reservoir> {
    if n_r < 1 {
        return Err(Error::Parameter("reservoir needs at least one node".into()));
    }
    if !(rho_target > 0.0 && rho_target < 1.0) {
        return Err(Error::Parameter(format!("rho_target must lie in (0,1), got {rho_target}")));
    }
    if !input_scale.is_finite() {
        return Err(Error::Parameter(format!("input_scale must be finite, got {input_scale}")));
    }
    check_leak(leak)?;
    let mut rng = seed::rng(seed);
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let mut w: Vec<f64> = (0..n_r * n_r).map(|_| unit.sample(&mut rng)).collect();
    let w_in: Vec<f64> = (0..n_r * d).map(|_| unit.sample(&mut rng) * input_scale).collect();

    // two passes: the second corrects the residual of the first estimate
    for _ in 0..2 {
        let rho = spectral_radius(&w, n_r)?;
        if rho == 0.0 {
            return Err(Error::Numeric("sampled reservoir has zero spectral radius".into()));
        }
        let k = rho_target / rho;
        w.iter_mut().for_each(|x| *x *= k);
    }
    Ok(Reservoir { n_r, d, w_in, w, leak, rho_target, seed })
}

/// Spectral radius by block power iteration with Rayleigh–Ritz extraction.
///
/// A block of vectors handles the complex-conjugate and near-tied dominant
/// eigenvalues typical of random matrices, where single-vector iteration
/// oscillates.
pub fn spectral_radius(w: &[f64], n: usize) -> Result<f64> {
    if w.len() != n * n {
        return Err(Error::shape("spectral_radius", &[w.len()], &[n, n]));
    }
    let a = DMatrix::from_row_slice(n, n, w);
    let p = POWER_BLOCK.min(n);
    let mut rng = seed::rng(0x5eed);
    let mut q = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    q = q.qr().q();
    let mut prev = f64::NAN;
    let mut stable = 0;
    for _ in 0..POWER_MAX_ITERS {
        let z = &a * &q;
        let ritz = q.transpose() * &z;
        let est = ritz.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
        if !est.is_finite() {
            return Err(Error::Numeric("spectral radius estimate is not finite".into()));
        }
        if est == 0.0 && z.norm() == 0.0 {
            return Ok(0.0);
        }
        if (est - prev).abs() <= POWER_TOL * est.max(f64::MIN_POSITIVE) {
            stable += 1;
            if stable >= 3 {
                return Ok(est);
            }
        } else {
            stable = 0;
        }
        prev = est;
        q = z.qr().q();
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge within {POWER_MAX_ITERS} iterations"
    )))
}

/// `s′ = (1 − leak)·s + leak·tanh(W_in·x + W·s)`.
pub fn esn_step(reservoir: &Reservoir, state: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let (n, d) = (reservoir.n_r, reservoir.d);
    if state.len() != n {
        return Err(Error::shape("esn_step state", &[state.len()], &[n]));
    }
    if x.len() != d {
        return Err(Error::shape("esn_step input", &[x.len()], &[d]));
    }
    let leak = reservoir.leak;
    Ok((0..n)
        .map(|i| {
            let wi = &reservoir.w_in[i * d..(i + 1) * d];
            let wr = &reservoir.w[i * n..(i + 1) * n];
            let pre: f64 = wi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + wr.iter().zip(state).map(|(a, b)| a * b).sum::<f64>();
            (1.0 - leak) * state[i] + leak * pre.tanh()
        })
        .collect())
}

/// Feed the rows of a window from a zeroed state; returns the final state.
pub fn esn_final_state(reservoir: &Reservoir, rows: &[impl AsRef<[f64]>]) -> Result<Vec<f64>> {
    rows.iter()
        .try_fold(reservoir.zero_state(), |s, row| esn_step(reservoir, &s, row.as_ref()))
}

/// Ridge-regression readout `(d′ × n_r)` from final states (rows of `states`)
/// to targets (rows of `targets`).
pub fn esn_fit_readout_ridge(states: &[Vec<f64>], targets: &[Vec<f64>], lambda: f64) -> Result<Vec<f64>> {
    if states.is_empty() {
        return Err(Error::Config("ridge readout needs at least one sample".into()));
    }
    if states.len() != targets.len() {
        return Err(Error::shape("ridge", &[states.len()], &[targets.len()]));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("ridge lambda must be finite and >= 0, got {lambda}")));
    }
    let n_r = states[0].len();
    let d_out = targets[0].len();
    if let Some(bad) = states.iter().find(|s| s.len() != n_r) {
        return Err(Error::shape("ridge states", &[bad.len()], &[n_r]));
    }
    if let Some(bad) = targets.iter().find(|t| t.len() != d_out) {
        return Err(Error::shape("ridge targets", &[bad.len()], &[d_out]));
    }
    let x = DMatrix::from_fn(states.len(), n_r, |i, j| states[i][j]);
    let y = DMatrix::from_fn(targets.len(), d_out, |i, j| targets[i][j]);
    let gram = x.transpose() * &x + DMatrix::identity(n_r, n_r) * lambda;
    let svd = gram.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= smax * 1e-13 {
        return Err(Error::Numeric(
            "ridge system is singular; use a regularization lambda > 0".into(),
        ));
    }
    let rhs = x.transpose() * y;
    let sol = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("ridge system is singular; use a regularization lambda > 0".into()))?;
    // sol is n_r × d′; the readout is its transpose, row-major
    let w: DMatrix<f64> = sol.transpose();
    let mut out = Vec::with_capacity(d_out * n_r);
    for i in 0..d_out {
        out.extend(w.row(i).iter());
    }
    Ok(out)
}

/// Apply a `d′ × n_r` row-major readout.
pub fn apply_readout(w_out: &[f64], state: &[f64]) -> Vec<f64> {
    let n = state.len();
    w_out
        .chunks(n)
        .map(|row| DVector::from_column_slice(row).dot(&DVector::from_column_slice(state)))
        .collect()
}
