//! Adam, seeded mini-batch epochs and early stopping.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor};
use crate::data::WindowedSample;
use crate::error::{Error, Result};
use crate::evaluation::ComputeTrace;
use crate::models::{Batch, Model, ModelKind, ModelSpec, Readout};
use crate::par::Parallelism;
use crate::seed;

/// Samples per forward pass when evaluating without gradients.
const EVAL_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Reload the best-validation weights when training ends.
    #[serde(default = "yes")]
    pub restore_best: bool,
    #[serde(default)]
    pub parallelism: Parallelism,
}

fn yes() -> bool {
    true
}

impl TrainConfig {
    pub const DEFAULT_EPOCHS: usize = 150;
    pub const DEFAULT_PATIENCE: usize = 50;

    /// Learning rate and batch size from `spec`, default epoch budget.
    pub fn for_spec(spec: &ModelSpec, seed: u64) -> Self {
        Self {
            max_epochs: Self::DEFAULT_EPOCHS,
            patience: Self::DEFAULT_PATIENCE,
            learning_rate: spec.learning_rate,
            batch_size: spec.batch_size,
            seed,
            restore_best: true,
            parallelism: Parallelism::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_epochs < 1 || self.patience < 1 {
            return Err(Error::Config("max_epochs and patience must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Bias-corrected Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerState {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self { m: zeros.clone(), v: zeros, step: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One Adam step applied in place.
pub fn adam_update(params: &mut [Tensor], grads: &[Tensor], state: &mut OptimizerState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Contract(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if !p.same_shape(g) {
            return Err(Error::Contract(format!("adam: param {:?} vs grad {:?}", p.shape(), g.shape())));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let iter = p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut().zip(v.data_mut()));
        for ((w, &gi), (mi, vi)) in iter {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Last epoch run (equals `max_epochs` when early stopping never fired).
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_val: f64,
    pub trace: ComputeTrace,
}

impl History {
    pub fn empty() -> Self {
        Self { epochs: Vec::new(), stopped_epoch: 0, best_epoch: 0, best_val: f64::INFINITY, trace: ComputeTrace::default() }
    }

    /// One JSON object per epoch.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for r in &self.epochs {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Optimizer state plus a running epoch counter that seeds the shuffles.
/// Kept across calls so federated rounds continue where they left off.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    opt: OptimizerState,
    epochs_done: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, model: &Model) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { opt: OptimizerState::new(model.params()), cfg, epochs_done: 0 })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    /// Next epoch over `train`; returns the mean batch loss.
    pub fn run_epoch(&mut self, model: &mut Model, train: &[WindowedSample], trace: &mut ComputeTrace) -> Result<f64> {
        self.epochs_done += 1;
        let epoch_seed = seed::derive(self.cfg.seed, self.epochs_done as u64);
        train_epoch(model, train, &mut self.opt, &self.cfg, epoch_seed, trace)
    }
}

/// One shuffled pass over `train` with MSE loss.
pub fn train_epoch(
    model: &mut Model,
    train: &[WindowedSample],
    opt: &mut OptimizerState,
    cfg: &TrainConfig,
    epoch_seed: u64,
    trace: &mut ComputeTrace,
) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut seed::rng(epoch_seed));
    let mut total = 0.0;
    let mut batches = 0usize;
    for chunk in order.chunks(cfg.batch_size) {
        let batch = Batch::from_samples(chunk.iter().map(|&i| &train[i]))?;
        let mut g = Graph::with_mode(cfg.parallelism);
        let ids = model.bind(&mut g, true)?;
        let fwd = model.forward(&mut g, &ids, &batch)?;
        let y = g.constant(Tensor::new(vec![batch.size, batch.targets], batch.y.clone())?)?;
        let loss = g.mse_loss(fwd.pred, y)?;
        let grads = g.backward(loss)?;
        let grads: Vec<Tensor> = ids.iter().map(|&id| grads.param(&g, id)).collect();
        let mut params = model.params().to_vec();
        adam_update(&mut params, &grads, opt, cfg.learning_rate)?;
        model.set_params(params)?;
        total += g.value(loss).item()?;
        batches += 1;
        trace.train_samples += batch.size as u64;
        trace.train_spikes += fwd.spikes.round() as u64;
    }
    Ok(total / batches as f64)
}

/// Predictions for `samples` in fixed-size chunks, counted as forward-only work.
pub fn predict(model: &Model, samples: &[WindowedSample], mode: Parallelism, trace: &mut ComputeTrace) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(EVAL_CHUNK) {
        let batch = Batch::from_samples(chunk)?;
        let mut g = Graph::with_mode(mode);
        let ids = model.bind(&mut g, false)?;
        let fwd = model.forward(&mut g, &ids, &batch)?;
        out.extend(g.value(fwd.pred).data().chunks(batch.targets).map(<[f64]>::to_vec));
        trace.eval_samples += batch.size as u64;
        trace.eval_spikes += fwd.spikes.round() as u64;
    }
    Ok(out)
}

/// Mean squared error over every target entry of `samples`.
pub fn evaluate_loss(model: &Model, samples: &[WindowedSample], mode: Parallelism, trace: &mut ComputeTrace) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("empty evaluation set".into()));
    }
    let preds = predict(model, samples, mode, trace)?;
    let (mut sq, mut n) = (0.0, 0usize);
    for (p, s) in preds.iter().zip(samples) {
        for (a, b) in p.iter().zip(&s.y) {
            sq += (a - b) * (a - b);
            n += 1;
        }
    }
    Ok(sq / n as f64)
}

/// Train until `max_epochs` or until validation loss has not strictly
/// improved for `patience` consecutive epochs.
pub fn fit(model: &mut Model, train: &[WindowedSample], val: &[WindowedSample], cfg: &TrainConfig) -> Result<History> {
    if val.is_empty() {
        return Err(Error::Config("empty validation set".into()));
    }
    let start = Instant::now();
    let mut history = History::empty();
    if model.kind() == ModelKind::Esn {
        if let Readout::Ridge { lambda } = model.spec().esn.readout {
            model.fit_ridge(train, lambda, cfg.parallelism)?;
            history.trace.eval_samples += train.len() as u64;
            let val_loss = evaluate_loss(model, val, cfg.parallelism, &mut history.trace)?;
            history.epochs.push(EpochRecord { epoch: 1, train_loss: f64::NAN, val_loss });
            history.stopped_epoch = 1;
            history.best_epoch = 1;
            history.best_val = val_loss;
            history.trace.wall_seconds = start.elapsed().as_secs_f64();
            return Ok(history);
        }
    }
    let mut trainer = Trainer::new(cfg.clone(), model)?;
    let mut best_params = model.params().to_vec();
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        let train_loss = trainer.run_epoch(model, train, &mut history.trace)?;
        let val_loss = evaluate_loss(model, val, cfg.parallelism, &mut history.trace)?;
        history.epochs.push(EpochRecord { epoch, train_loss, val_loss });
        history.stopped_epoch = epoch;
        if val_loss < history.best_val {
            history.best_val = val_loss;
            history.best_epoch = epoch;
            best_params = model.params().to_vec();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    if cfg.restore_best {
        model.set_params(best_params)?;
    }
    history.trace.wall_seconds = start.elapsed().as_secs_f64();
    Ok(history)
}
