use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ecoforecast::autodiff::SurrogateSpec;
use ecoforecast::data::{SplitRatios, SyntheticSpec};
use ecoforecast::evaluation::{EnergyModel, Exponents, Setting};
use ecoforecast::federated::RoundConfig;
use ecoforecast::models::{EsnConfig, ModelKind, ModelSpec, NeuronConfig, DEFAULT_WINDOW};
use ecoforecast::par::Parallelism;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, Result};

/// Where station series come from: CSV files or synthetic presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default)]
    pub csv: Vec<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    /// Preset station profiles to generate.
    #[serde(default)]
    pub stations: Vec<String>,
    #[serde(default = "default_days")]
    pub n_days: u32,
    #[serde(default)]
    pub seed: u64,
    /// Fully specified stations, generated after the presets.
    #[serde(default)]
    pub custom: Vec<SyntheticSpec>,
}

fn default_days() -> u32 {
    2
}

impl SyntheticConfig {
    /// Preset stations get seeds `seed, seed + 1, …` in list order.
    pub fn specs(&self) -> Vec<SyntheticSpec> {
        let presets = self
            .stations
            .iter()
            .enumerate()
            .map(|(i, id)| SyntheticSpec::station_preset(id, self.n_days, self.seed.wrapping_add(i as u64)));
        presets.chain(self.custom.iter().cloned()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverride {
    pub hidden: Option<usize>,
    pub threshold: Option<f64>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub r: Option<f64>,
    pub c: Option<f64>,
    pub recurrent_init: Option<f64>,
    pub surrogate: Option<SurrogateSpec>,
    pub esn: Option<EsnConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "yes")]
    pub restore_best: bool,
}

fn default_epochs() -> usize {
    150
}

fn default_patience() -> usize {
    50
}

fn yes() -> bool {
    true
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self { max_epochs: default_epochs(), patience: default_patience(), restore_best: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub models: Vec<ModelKind>,
    #[serde(default = "default_settings")]
    pub settings: Vec<Setting>,
    /// Spike timesteps; ignored by non-spiking models.
    #[serde(default = "default_timesteps")]
    pub timesteps: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub federated: RoundConfig,
    #[serde(default)]
    pub energy: EnergyModel,
    #[serde(default)]
    pub sustainability: Exponents,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Concurrent grid cells; 0 means one per available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub parallelism: Parallelism,
    #[serde(default)]
    pub overrides: BTreeMap<ModelKind, ModelOverride>,
}

fn default_settings() -> Vec<Setting> {
    vec![Setting::Centralized, Setting::Federated]
}

fn default_timesteps() -> Vec<usize> {
    vec![1, 7, 10, 50, 70, 100]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a config file; relative CSV paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::ConfigRead { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            for p in &mut cfg.data.csv {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.models.is_empty() {
            return bad("at least one model is required");
        }
        if self.settings.is_empty() {
            return bad("at least one setting is required");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.models.iter().any(|m| m.is_spiking()) && self.timesteps.is_empty() {
            return bad("spiking models need a non-empty timestep list");
        }
        if self.timesteps.contains(&0) {
            return bad("timesteps must be >= 1");
        }
        let has_csv = !self.data.csv.is_empty();
        let has_synth = self.data.synthetic.is_some();
        if has_csv == has_synth {
            return bad("data needs exactly one of `csv` or `synthetic`");
        }
        self.data.split.validate()?;
        self.federated.validate()?;
        self.energy.validate()?;
        for kind in &self.models {
            self.model_spec(*kind, self.timesteps.first().copied().unwrap_or(1))?.validate()?;
        }
        Ok(())
    }

    /// Spec for `kind` after tuned defaults and any configured overrides.
    pub fn model_spec(&self, kind: ModelKind, timesteps: usize) -> Result<ModelSpec> {
        let mut spec = ModelSpec::default_for(kind);
        spec.window = self.data.window;
        if kind.is_spiking() {
            spec.timesteps = timesteps;
        }
        if let Some(o) = self.overrides.get(&kind) {
            let n: &mut NeuronConfig = &mut spec.neuron;
            macro_rules! set {
                ($($field:ident => $target:expr),* $(,)?) => {
                    $(if let Some(v) = o.$field { $target = v; })*
                };
            }
            set!(
                hidden => spec.hidden,
                threshold => spec.threshold,
                learning_rate => spec.learning_rate,
                batch_size => spec.batch_size,
                beta => n.beta,
                alpha => n.alpha,
                r => n.r,
                c => n.c,
                recurrent_init => n.recurrent_init,
                surrogate => n.surrogate,
                esn => spec.esn,
            );
        }
        Ok(spec)
    }

    /// Hex SHA-256 of the canonical JSON form of this config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
