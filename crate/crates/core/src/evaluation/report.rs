use std::fmt;

use serde::{Deserialize, Serialize};

use super::energy::{ComputeCounts, EnergyMode};
use crate::models::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Centralized,
    Federated,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::Centralized => "centralized",
            Setting::Federated => "federated",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one (model, setting, T, seed) grid cell. Metrics are on the
/// test split in original units; `s` uses the validation NRMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: ModelKind,
    pub setting: Setting,
    /// Spike timesteps (spiking models only).
    #[serde(rename = "T")]
    pub timesteps: Option<usize>,
    pub seed: u64,
    pub nrmse: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub mse: f64,
    pub val_nrmse: Option<f64>,
    /// MSE on the normalized test targets.
    pub test_loss: f64,
    pub energy_wh: f64,
    pub energy_mode: EnergyMode,
    #[serde(rename = "D_mb")]
    pub d_mb: f64,
    #[serde(rename = "S")]
    pub s: Option<f64>,
    pub epochs: usize,
    pub param_count: usize,
    pub compute: ComputeCounts,
}
