//! Cross-silo federated simulation: one client per station, sample-weighted
//! FedAvg, and an exchanged-byte ledger.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::data::{prepare_station, Dataset, SplitRatios, StationSeries};
use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec};
use crate::par::{self, Parallelism};
use crate::training::{evaluate_loss, EpochRecord, History, TrainConfig, Trainer};

/// Bytes per exchanged weight.
pub const BYTES_PER_WEIGHT: u64 = 8;
pub const BYTES_PER_MB: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    /// Early-stopping patience in rounds.
    pub patience: usize,
    pub restore_best: bool,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self { rounds: 50, local_epochs: 3, patience: 17, restore_best: true }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 || self.local_epochs < 1 || self.patience < 1 {
            return Err(Error::Config("rounds, local_epochs and patience must be >= 1".into()));
        }
        Ok(())
    }
}

/// A station's local data. Only the client side ever touches it.
#[derive(Debug, Clone)]
pub struct ClientData {
    pub client_id: String,
    pub data: Dataset,
}

/// What a client sends to the server: weights and a sample count, never data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: String,
    pub params: Vec<Tensor>,
    pub n_samples: usize,
}

/// Client-side bookkeeping visible after a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientState {
    pub client_id: String,
    pub n_samples: usize,
    pub history: History,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub round: usize,
    pub client: usize,
    pub upload_bytes: u64,
    pub download_bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommsLedger {
    pub clients: Vec<String>,
    pub transfers: Vec<Transfer>,
}

impl CommsLedger {
    pub fn record(&mut self, round: usize, client: usize, params: usize) {
        let bytes = params as u64 * BYTES_PER_WEIGHT;
        self.transfers.push(Transfer { round, client, upload_bytes: bytes, download_bytes: bytes });
    }

    pub fn total_bytes(&self) -> u64 {
        self.transfers.iter().map(|t| t.upload_bytes + t.download_bytes).sum()
    }

    pub fn total_mb(&self) -> f64 {
        self.total_bytes() as f64 / BYTES_PER_MB
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientLoss {
    pub client_id: String,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub clients: Vec<ClientLoss>,
    pub global_val_loss: f64,
    pub cumulative_mb: f64,
}

#[derive(Debug, Clone)]
pub struct FederatedOutcome {
    pub model: Model,
    /// One record per round, with client-weighted losses.
    pub history: History,
    pub ledger: CommsLedger,
    pub rounds: Vec<RoundRecord>,
    pub clients: Vec<ClientState>,
}

impl FederatedOutcome {
    pub fn write_round_log(&self, mut out: impl Write) -> Result<()> {
        for r in &self.rounds {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Sample-weighted mean of client weights.
///
/// Updates are combined in `client_id` order, so the result does not depend
/// on arrival order. The sum is taken as offsets from the first update, which
/// makes identical updates (and a single update) come back bit-exactly.
pub fn fedavg(updates: &[ClientUpdate]) -> Result<Vec<Tensor>> {
    let mut sorted: Vec<&ClientUpdate> = updates.iter().collect();
    sorted.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    let first = *sorted.first().ok_or_else(|| Error::Contract("fedavg needs at least one update".into()))?;
    for u in &sorted {
        if u.params.len() != first.params.len() || u.params.iter().zip(&first.params).any(|(a, b)| !a.same_shape(b)) {
            return Err(Error::Contract(format!(
                "fedavg: update from {} does not match the shapes of {}",
                u.client_id, first.client_id
            )));
        }
    }
    let total: usize = sorted.iter().map(|u| u.n_samples).sum();
    if total == 0 {
        return Err(Error::Contract("fedavg needs a positive total sample count".into()));
    }
    let mut out = first.params.clone();
    for (ti, t) in out.iter_mut().enumerate() {
        for (ei, w) in t.data_mut().iter_mut().enumerate() {
            let base = *w;
            let mut offset = 0.0;
            for u in &sorted[1..] {
                offset += (u.n_samples as f64 / total as f64) * (u.params[ti].data()[ei] - base);
            }
            *w = base + offset;
        }
    }
    Ok(out)
}

/// One client per station; each is windowed, split and normalized on its own.
pub fn partition_by_station(series: &[StationSeries], window: usize, ratios: SplitRatios) -> Result<Vec<ClientData>> {
    if series.is_empty() {
        return Err(Error::Config("federated setting needs at least one station".into()));
    }
    series
        .iter()
        .map(|s| {
            Ok(ClientData {
                client_id: s.station_id().to_string(),
                data: prepare_station(s, window, ratios)?,
            })
        })
        .collect()
}

struct Worker<'a> {
    index: usize,
    data: &'a ClientData,
    model: Model,
    trainer: Trainer,
    history: History,
}

/// Run FedAvg rounds with early stopping on the validation loss of the
/// aggregated model, weighted by client validation sizes.
pub fn run_federated(
    clients: &[ClientData],
    spec: &ModelSpec,
    round_cfg: &RoundConfig,
    train_cfg: &TrainConfig,
) -> Result<FederatedOutcome> {
    round_cfg.validate()?;
    train_cfg.validate()?;
    if clients.is_empty() {
        return Err(Error::Config("federated run needs at least one client".into()));
    }
    if let Some(c) = clients.iter().find(|c| c.data.train.is_empty() || c.data.val.is_empty()) {
        return Err(Error::Config(format!("client {} has no train or validation data", c.client_id)));
    }
    let start = Instant::now();
    let mode = train_cfg.parallelism;
    let mut global = Model::new(spec.clone(), train_cfg.seed)?;
    let mut workers = clients
        .iter()
        .enumerate()
        .map(|(index, data)| {
            let mut cfg = train_cfg.clone();
            cfg.seed = train_cfg.seed.wrapping_add(index as u64);
            // every client starts from the broadcast model, so an ESN
            // reservoir is shared and only its readout is exchanged
            let model = global.clone();
            Ok(Worker { index, data, trainer: Trainer::new(cfg, &model)?, model, history: History::empty() })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut ledger = CommsLedger { clients: clients.iter().map(|c| c.client_id.clone()).collect(), transfers: Vec::new() };
    let mut history = History::empty();
    let mut rounds = Vec::new();
    let mut best_params = global.params().to_vec();
    let mut stale = 0;
    let n_params = global.param_count();
    let val_total: usize = clients.iter().map(|c| c.data.val.len()).sum();
    let train_total: usize = clients.iter().map(|c| c.data.train.len()).sum();

    for round in 1..=round_cfg.rounds {
        let broadcast = global.params().to_vec();
        let results = par::map_mut(mode, &mut workers, |w| -> Result<(ClientUpdate, f64)> {
            w.model.set_params(broadcast.clone())?;
            let mut loss = 0.0;
            for _ in 0..round_cfg.local_epochs {
                loss = w.trainer.run_epoch(&mut w.model, &w.data.data.train, &mut w.history.trace)?;
            }
            w.history.stopped_epoch = w.trainer.epochs_done();
            Ok((
                ClientUpdate {
                    client_id: w.data.client_id.clone(),
                    params: w.model.params().to_vec(),
                    n_samples: w.data.data.train.len(),
                },
                loss,
            ))
        });
        let mut updates = Vec::with_capacity(results.len());
        let mut train_losses = Vec::with_capacity(results.len());
        for (w, r) in workers.iter().zip(results) {
            let (u, loss) = r.map_err(|e| Error::Client { client_id: w.data.client_id.clone(), source: Box::new(e) })?;
            ledger.record(round, w.index, n_params);
            updates.push(u);
            train_losses.push(loss);
        }
        global.set_params(fedavg(&updates)?)?;

        // clients score the aggregated model on their own validation data
        let scored = par::map_mut(mode, &mut workers, |w| {
            evaluate_loss(&global, &w.data.data.val, Parallelism::Sequential, &mut w.history.trace)
        });
        let mut client_losses = Vec::with_capacity(workers.len());
        let (mut val_sum, mut train_sum) = (0.0, 0.0);
        for ((w, r), &tl) in workers.iter_mut().zip(scored).zip(&train_losses) {
            let vl = r.map_err(|e| Error::Client { client_id: w.data.client_id.clone(), source: Box::new(e) })?;
            w.history.epochs.push(EpochRecord { epoch: round, train_loss: tl, val_loss: vl });
            val_sum += vl * w.data.data.val.len() as f64;
            train_sum += tl * w.data.data.train.len() as f64;
            client_losses.push(ClientLoss { client_id: w.data.client_id.clone(), train_loss: tl, val_loss: vl });
        }
        let global_val = val_sum / val_total as f64;
        history.epochs.push(EpochRecord { epoch: round, train_loss: train_sum / train_total as f64, val_loss: global_val });
        history.stopped_epoch = round;
        rounds.push(RoundRecord { round, clients: client_losses, global_val_loss: global_val, cumulative_mb: ledger.total_mb() });

        if global_val < history.best_val {
            history.best_val = global_val;
            history.best_epoch = round;
            best_params = global.params().to_vec();
            stale = 0;
        } else {
            stale += 1;
            if stale >= round_cfg.patience {
                break;
            }
        }
    }
    if round_cfg.restore_best {
        global.set_params(best_params)?;
    }
    for w in &workers {
        history.trace.merge(&w.history.trace);
    }
    history.trace.wall_seconds = start.elapsed().as_secs_f64();
    let clients = workers
        .into_iter()
        .map(|w| ClientState { client_id: w.data.client_id.clone(), n_samples: w.data.data.train.len(), history: w.history })
        .collect();
    Ok(FederatedOutcome { model: global, history, ledger, rounds, clients })
}
