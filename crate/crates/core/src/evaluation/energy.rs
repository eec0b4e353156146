//! Deterministic energy estimate from operation counts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{layer_costs, LayerCost, ModelSpec};

const J_PER_WH: f64 = 3600.0;

/// Work recorded while training or evaluating one model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComputeTrace {
    /// Samples passed forward and backward.
    pub train_samples: u64,
    /// Samples passed forward only.
    pub eval_samples: u64,
    /// Hidden spikes emitted during training passes.
    pub train_spikes: u64,
    /// Hidden spikes emitted during evaluation passes.
    pub eval_spikes: u64,
    /// Wall-clock seconds; not part of any deterministic output.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl ComputeTrace {
    pub fn merge(&mut self, other: &ComputeTrace) {
        self.train_samples += other.train_samples;
        self.eval_samples += other.eval_samples;
        self.train_spikes += other.train_spikes;
        self.eval_spikes += other.eval_spikes;
        self.wall_seconds += other.wall_seconds;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComputeCounts {
    /// Dense multiply-accumulates, backward included at 2× forward.
    pub macs: u64,
    pub neuron_updates: u64,
    /// Accumulates triggered by emitted spikes (forward passes).
    pub synaptic_events: u64,
    /// Forward MACs of spike-input layers, which an event-driven substrate
    /// replaces with `synaptic_events`.
    pub spike_layer_macs: u64,
}

/// Aggregate per-layer costs over a trace.
pub fn count_compute(spec: &ModelSpec, trace: &ComputeTrace) -> ComputeCounts {
    count_layers(&layer_costs(spec), trace)
}

pub(crate) fn count_layers(layers: &[LayerCost], trace: &ComputeTrace) -> ComputeCounts {
    let forward = trace.train_samples + trace.eval_samples;
    let spikes = trace.train_spikes + trace.eval_spikes;
    let mut c = ComputeCounts::default();
    for l in layers {
        let backward = if l.on_grad_path { 2 * trace.train_samples } else { 0 };
        c.macs += l.macs * (forward + backward);
        c.neuron_updates += l.neuron_updates * (forward + backward);
        if l.spike_input {
            c.synaptic_events += spikes * l.fan_out;
            c.spike_layer_macs += l.macs * forward;
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyMode {
    #[default]
    Analytic,
    EventDriven,
    Wallclock,
}

impl EnergyMode {
    pub fn name(self) -> &'static str {
        match self {
            EnergyMode::Analytic => "analytic",
            EnergyMode::EventDriven => "event-driven",
            EnergyMode::Wallclock => "wallclock",
        }
    }
}

impl fmt::Display for EnergyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnergyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(EnergyMode::Analytic),
            "event-driven" => Ok(EnergyMode::EventDriven),
            "wallclock" => Ok(EnergyMode::Wallclock),
            other => Err(Error::Config(format!(
                "unknown energy mode `{other}` (expected analytic, event-driven or wallclock)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyModel {
    pub mode: EnergyMode,
    pub j_per_mac: f64,
    pub j_per_neuron_update: f64,
    pub device_watts: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self { mode: EnergyMode::Analytic, j_per_mac: 4.6e-12, j_per_neuron_update: 1e-12, device_watts: 15.0 }
    }
}

impl EnergyModel {
    pub fn with_mode(mut self, mode: EnergyMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("j_per_mac", self.j_per_mac),
            ("j_per_neuron_update", self.j_per_neuron_update),
            ("device_watts", self.device_watts),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("energy constant {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Energy in Wh for already aggregated counts (wallclock uses `seconds`).
    pub fn energy_wh(&self, counts: &ComputeCounts, seconds: f64) -> f64 {
        let joules = match self.mode {
            EnergyMode::Analytic => counts.macs as f64 * self.j_per_mac,
            EnergyMode::EventDriven => {
                let macs = counts.macs - counts.spike_layer_macs + counts.synaptic_events;
                macs as f64 * self.j_per_mac
            }
            EnergyMode::Wallclock => return seconds * self.device_watts / J_PER_WH,
        };
        (joules + counts.neuron_updates as f64 * self.j_per_neuron_update) / J_PER_WH
    }
}

/// Estimated training energy in Wh.
pub fn estimate_energy(spec: &ModelSpec, trace: &ComputeTrace, model: &EnergyModel) -> Result<f64> {
    model.validate()?;
    Ok(model.energy_wh(&count_compute(spec, trace), trace.wall_seconds))
}
