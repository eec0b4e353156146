use std::path::{Path, PathBuf};

use ecoforecast::data::{generate_synthetic, load_csv, prepare_pooled, write_csv, Dataset, StationSeries};
use ecoforecast::evaluation::{
    count_compute, metrics, sustainability_index, MetricsReport, RunReport, Setting,
    SustainabilityInputs,
};
use ecoforecast::federated::{partition_by_station, run_federated, ClientData};
use ecoforecast::models::{Model, ModelKind};
use ecoforecast::training::{fit, predict, History, TrainConfig};
use ecoforecast::{evaluation::ComputeTrace, par::Parallelism};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::report::write_sweep;
use crate::{io_err, CliError, Result};

/// One (model, setting, T, seed) point of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub model: ModelKind,
    pub setting: Setting,
    #[serde(rename = "T")]
    pub timesteps: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: Cell,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub artifact_version: String,
    pub seeds: Vec<u64>,
    /// The effective configuration every run was produced from.
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub provenance: Provenance,
    pub runs: Vec<RunReport>,
    pub failures: Vec<CellFailure>,
}

impl ResultsBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(io_err(path))
    }
}

/// Cells for `cfg`; non-spiking models run once per setting and seed.
pub fn grid(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &model in &cfg.models {
        let ts: Vec<Option<usize>> =
            if model.is_spiking() { cfg.timesteps.iter().map(|&t| Some(t)).collect() } else { vec![None] };
        for &setting in &cfg.settings {
            for &timesteps in &ts {
                for &seed in &cfg.seeds {
                    cells.push(Cell { model, setting, timesteps, seed });
                }
            }
        }
    }
    cells.sort();
    cells.dedup();
    cells
}

/// Load or generate every station series named in the config.
pub fn load_series(cfg: &ExperimentConfig) -> Result<Vec<StationSeries>> {
    if let Some(s) = &cfg.data.synthetic {
        let specs = s.specs();
        if specs.is_empty() {
            return Err(CliError::Config("synthetic data needs at least one station".into()));
        }
        return specs.iter().map(|sp| Ok(generate_synthetic(sp)?)).collect();
    }
    cfg.data.csv.iter().map(|p| Ok(load_csv(p)?)).collect()
}

struct Prepared {
    pooled: Option<Dataset>,
    clients: Option<Vec<ClientData>>,
}

fn prepare(cfg: &ExperimentConfig, series: &[StationSeries]) -> Result<Prepared> {
    let pooled = cfg
        .settings
        .contains(&Setting::Centralized)
        .then(|| prepare_pooled(series, cfg.data.window, cfg.data.split))
        .transpose()?;
    let clients = cfg
        .settings
        .contains(&Setting::Federated)
        .then(|| partition_by_station(series, cfg.data.window, cfg.data.split))
        .transpose()?;
    Ok(Prepared { pooled, clients })
}

/// Denormalized predictions and targets, plus normalized-scale squared error.
struct Scored {
    preds: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    sq_err: f64,
    entries: usize,
}

impl Scored {
    fn new() -> Self {
        Self { preds: Vec::new(), targets: Vec::new(), sq_err: 0.0, entries: 0 }
    }

    fn add(&mut self, model: &Model, data: &Dataset, test: bool, mode: Parallelism, trace: &mut ComputeTrace) -> Result<()> {
        let samples = if test { &data.test } else { &data.val };
        let preds = predict(model, samples, mode, trace)?;
        for (p, s) in preds.iter().zip(samples) {
            for (a, b) in p.iter().zip(&s.y) {
                self.sq_err += (a - b) * (a - b);
                self.entries += 1;
            }
            self.preds.push(data.stats.denormalize_targets(p));
            self.targets.push(data.stats.denormalize_targets(&s.y));
        }
        Ok(())
    }

    fn metrics(&self) -> Result<MetricsReport> {
        Ok(metrics(&self.preds, &self.targets)?)
    }

    fn loss(&self) -> f64 {
        self.sq_err / self.entries.max(1) as f64
    }
}

/// Train and score one grid cell.
pub fn run_cell(cfg: &ExperimentConfig, data: &[StationSeries], cell: Cell) -> Result<RunReport> {
    let prepared = prepare(&ExperimentConfig { settings: vec![cell.setting], ..cfg.clone() }, data)?;
    run_prepared(cfg, &prepared, cell)
}

fn run_prepared(cfg: &ExperimentConfig, prepared: &Prepared, cell: Cell) -> Result<RunReport> {
    let spec = cfg.model_spec(cell.model, cell.timesteps.unwrap_or(1))?;
    let mut train_cfg = TrainConfig::for_spec(&spec, cell.seed);
    train_cfg.max_epochs = cfg.training.max_epochs;
    train_cfg.patience = cfg.training.patience;
    train_cfg.restore_best = cfg.training.restore_best;
    train_cfg.parallelism = cfg.parallelism;
    let mode = cfg.parallelism;

    // evaluation passes after training are not part of the training cost
    let mut scoring = ComputeTrace::default();
    let (model, history, d_mb, val, test): (Model, History, f64, Scored, Scored) = match cell.setting {
        Setting::Centralized => {
            let data = prepared.pooled.as_ref().ok_or_else(|| CliError::Contract("centralized data missing".into()))?;
            let mut model = Model::new(spec.clone(), cell.seed)?;
            let history = fit(&mut model, &data.train, &data.val, &train_cfg)?;
            let (mut val, mut test) = (Scored::new(), Scored::new());
            val.add(&model, data, false, mode, &mut scoring)?;
            test.add(&model, data, true, mode, &mut scoring)?;
            (model, history, data.raw_bytes as f64 / ecoforecast::federated::BYTES_PER_MB, val, test)
        }
        Setting::Federated => {
            let clients = prepared.clients.as_ref().ok_or_else(|| CliError::Contract("federated data missing".into()))?;
            let out = run_federated(clients, &spec, &cfg.federated, &train_cfg)?;
            let (mut val, mut test) = (Scored::new(), Scored::new());
            for c in clients {
                val.add(&out.model, &c.data, false, mode, &mut scoring)?;
                test.add(&out.model, &c.data, true, mode, &mut scoring)?;
            }
            (out.model, out.history, out.ledger.total_mb(), val, test)
        }
    };
    let m = test.metrics()?;
    let val_nrmse = val.metrics()?.nrmse;
    let compute = count_compute(&spec, &history.trace);
    let energy_wh = cfg.energy.energy_wh(&compute, history.trace.wall_seconds);
    let s = match val_nrmse {
        Some(e) if e >= 0.0 => Some(sustainability_index(&SustainabilityInputs {
            e_val: e,
            c_tr: energy_wh,
            d_mb,
            exponents: cfg.sustainability,
        })?),
        _ => None,
    };
    Ok(RunReport {
        model: cell.model,
        setting: cell.setting,
        timesteps: cell.timesteps,
        seed: cell.seed,
        nrmse: m.nrmse,
        mae: m.mae,
        rmse: m.rmse,
        mse: m.mse,
        val_nrmse,
        test_loss: test.loss(),
        energy_wh,
        energy_mode: cfg.energy.mode,
        d_mb,
        s,
        epochs: history.stopped_epoch,
        param_count: model.param_count(),
        compute,
    })
}

fn execute(cfg: &ExperimentConfig, cells: &[Cell]) -> Result<ResultsBundle> {
    let series = load_series(cfg)?;
    let prepared = prepare(cfg, &series)?;
    let outcomes = run_parallel(cfg, cells, |c| run_prepared(cfg, &prepared, c));
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (cell, r) in cells.iter().zip(outcomes) {
        match r {
            Ok(rep) => runs.push(rep),
            Err(e) => failures.push(CellFailure { cell: *cell, error: e.to_string() }),
        }
    }
    Ok(ResultsBundle {
        provenance: Provenance {
            config_hash: cfg.hash(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: cfg.seeds.clone(),
            config: cfg.clone(),
        },
        runs,
        failures,
    })
}

#[cfg(feature = "parallel")]
fn run_parallel<F>(cfg: &ExperimentConfig, cells: &[Cell], f: F) -> Vec<Result<RunReport>>
where
    F: Fn(Cell) -> Result<RunReport> + Sync + Send,
{
    use rayon::prelude::*;
    if cfg.parallelism == Parallelism::Sequential {
        return cells.iter().map(|&c| f(c)).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(pool) => pool.install(|| cells.par_iter().map(|&c| f(c)).collect()),
        Err(_) => cells.iter().map(|&c| f(c)).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<F>(_cfg: &ExperimentConfig, cells: &[Cell], f: F) -> Vec<Result<RunReport>>
where
    F: Fn(Cell) -> Result<RunReport>,
{
    cells.iter().map(|&c| f(c)).collect()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Run the whole grid and write `results.json` into the output directory.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<ResultsBundle> {
    cfg.validate()?;
    let bundle = execute(cfg, &grid(cfg))?;
    ensure_dir(&cfg.output_dir)?;
    bundle.save(&cfg.output_dir.join("results.json"))?;
    Ok(bundle)
}

/// Spiking models only; writes only `timestep_sweep.csv`.
pub fn cmd_sweep_timesteps(cfg: &ExperimentConfig) -> Result<ResultsBundle> {
    let models: Vec<ModelKind> = cfg.models.iter().copied().filter(|m| m.is_spiking()).collect();
    if models.is_empty() {
        return Err(CliError::Config("timestep sweep needs at least one spiking model".into()));
    }
    let restricted = ExperimentConfig { models, ..cfg.clone() };
    restricted.validate()?;
    let bundle = execute(&restricted, &grid(&restricted))?;
    ensure_dir(&cfg.output_dir)?;
    write_sweep(&bundle, &cfg.output_dir.join("timestep_sweep.csv"))?;
    Ok(bundle)
}

/// Write one CSV per configured synthetic station; returns the paths.
pub fn cmd_generate_data(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let synth = cfg
        .data
        .synthetic
        .as_ref()
        .ok_or_else(|| CliError::Config("generate-data needs a [data.synthetic] section".into()))?;
    let specs = synth.specs();
    if specs.is_empty() {
        return Err(CliError::Config("synthetic data needs at least one station".into()));
    }
    ensure_dir(&cfg.output_dir)?;
    specs
        .iter()
        .map(|spec| {
            let series = generate_synthetic(spec)?;
            let path = cfg.output_dir.join(format!("{}.csv", spec.station_id));
            write_csv(&series, &path)?;
            Ok(path)
        })
        .collect()
}
