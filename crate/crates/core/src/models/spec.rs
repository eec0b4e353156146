use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::neuron::{NeuronKind, NeuronParams, Reset};
use crate::autodiff::SurrogateSpec;
use crate::data::{N_FEATURES, N_TARGETS};
use crate::error::{Error, Result};

/// Every architecture in the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Cnn,
    Rnn,
    Esn,
    Lapicque,
    Leaky,
    #[serde(rename = "rleaky")]
    RLeaky,
    Synaptic,
    Alpha,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Lapicque,
        ModelKind::Leaky,
        ModelKind::RLeaky,
        ModelKind::Synaptic,
        ModelKind::Alpha,
        ModelKind::Esn,
        ModelKind::Mlp,
        ModelKind::Cnn,
        ModelKind::Rnn,
    ];

    pub fn neuron(self) -> Option<NeuronKind> {
        Some(match self {
            ModelKind::Lapicque => NeuronKind::Lapicque,
            ModelKind::Leaky => NeuronKind::Leaky,
            ModelKind::RLeaky => NeuronKind::RLeaky,
            ModelKind::Synaptic => NeuronKind::Synaptic,
            ModelKind::Alpha => NeuronKind::Alpha,
            _ => return None,
        })
    }

    pub fn is_spiking(self) -> bool {
        self.neuron().is_some()
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Cnn => "cnn",
            ModelKind::Rnn => "rnn",
            ModelKind::Esn => "esn",
            ModelKind::Lapicque => "lapicque",
            ModelKind::Leaky => "leaky",
            ModelKind::RLeaky => "rleaky",
            ModelKind::Synaptic => "synaptic",
            ModelKind::Alpha => "alpha",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::Config(format!("unknown model `{s}`")))
    }
}

/// Neuron constants shared by the hidden and output spiking layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronConfig {
    pub beta: f64,
    pub alpha: f64,
    pub r: f64,
    pub c: f64,
    /// Initial value of the learnable RLeaky spike gain.
    pub recurrent_init: f64,
    pub surrogate: SurrogateSpec,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            alpha: 0.9,
            r: 1.0,
            c: 5.0,
            recurrent_init: 1.0,
            surrogate: SurrogateSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Readout {
    /// Trained with the optimizer like every other model.
    Gradient,
    /// One-shot ridge regression on the final reservoir states.
    Ridge { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsnConfig {
    pub rho: f64,
    pub leak: f64,
    pub input_scale: f64,
    pub readout: Readout,
}

impl Default for EsnConfig {
    fn default() -> Self {
        Self { rho: 0.9, leak: 1.0, input_scale: 0.5, readout: Readout::Gradient }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hidden: usize,
    /// Spike timesteps per input (spiking models only).
    pub timesteps: usize,
    /// Hidden-layer firing threshold (spiking models only).
    pub threshold: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub window: usize,
    pub n_features: usize,
    pub n_targets: usize,
    #[serde(default)]
    pub neuron: NeuronConfig,
    #[serde(default)]
    pub esn: EsnConfig,
}

pub const DEFAULT_TIMESTEPS: usize = 7;
pub const DEFAULT_WINDOW: usize = 10;

impl ModelSpec {
    /// Tuned defaults for `kind`.
    pub fn default_for(kind: ModelKind) -> Self {
        let (hidden, threshold, learning_rate, batch_size) = match kind {
            ModelKind::Lapicque => (256, 1.6, 1.09e-4, 130),
            ModelKind::Leaky => (96, 1.7, 2.39e-4, 64),
            ModelKind::RLeaky => (256, 2.0, 5.85e-4, 32),
            ModelKind::Synaptic => (128, 1.7, 1.07e-4, 128),
            ModelKind::Alpha => (256, 2.0, 5.85e-4, 32),
            ModelKind::Mlp | ModelKind::Cnn | ModelKind::Rnn | ModelKind::Esn => (128, 0.0, 1e-3, 128),
        };
        let mut neuron = NeuronConfig::default();
        if kind == ModelKind::Alpha {
            neuron.beta = 0.8;
        }
        Self {
            kind,
            hidden,
            timesteps: if kind.is_spiking() { DEFAULT_TIMESTEPS } else { 1 },
            threshold,
            learning_rate,
            batch_size,
            window: DEFAULT_WINDOW,
            n_features: N_FEATURES,
            n_targets: N_TARGETS,
            neuron,
            esn: EsnConfig::default(),
        }
    }

    pub fn with_timesteps(mut self, t: usize) -> Self {
        self.timesteps = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.hidden == 0 {
            return cfg("hidden must be > 0".into());
        }
        if self.window == 0 || self.n_features == 0 || self.n_targets == 0 {
            return cfg("window, n_features and n_targets must be > 0".into());
        }
        if self.batch_size == 0 {
            return cfg("batch_size must be > 0".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return cfg(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.kind.is_spiking() {
            if self.timesteps < 1 {
                return cfg("timesteps must be >= 1 for spiking models".into());
            }
            if !(self.threshold > 0.0) {
                return cfg(format!("hidden threshold must be > 0, got {}", self.threshold));
            }
            self.hidden_neuron()?.validate()?;
        }
        if self.kind == ModelKind::Cnn && (self.window < 2 || self.n_features < 2) {
            return Err(Error::shape("cnn pooling", &[self.window, self.n_features], &[2, 2]));
        }
        if let Readout::Ridge { lambda } = self.esn.readout {
            if self.kind == ModelKind::Esn && !(lambda >= 0.0 && lambda.is_finite()) {
                return cfg(format!("ridge lambda must be >= 0, got {lambda}"));
            }
        }
        Ok(())
    }

    fn neuron_params(&self, threshold: f64, reset: Reset) -> Result<NeuronParams> {
        let kind = self
            .kind
            .neuron()
            .ok_or_else(|| Error::Config(format!("{} is not a spiking model", self.kind)))?;
        let n = self.neuron;
        Ok(NeuronParams {
            kind,
            r: n.r,
            c: n.c,
            beta: n.beta,
            alpha: n.alpha,
            v: n.recurrent_init,
            threshold,
            reset,
        })
    }

    /// Hidden spiking layer: subtract reset at the configured threshold.
    pub fn hidden_neuron(&self) -> Result<NeuronParams> {
        self.neuron_params(self.threshold, Reset::Subtract)
    }

    /// Output layer: same dynamics, never resets.
    pub fn output_neuron(&self) -> Result<NeuronParams> {
        self.neuron_params(self.threshold, Reset::None)
    }

    pub fn input_len(&self) -> usize {
        self.window * self.n_features
    }
}
