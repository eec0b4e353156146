//! Error metrics, the compute-count energy model and the sustainability index.

mod energy;
mod metrics;
mod report;

pub use energy::{count_compute, estimate_energy, ComputeCounts, ComputeTrace, EnergyMode, EnergyModel};
pub use metrics::{metrics, MetricsReport};
pub use report::{RunReport, Setting};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents of the sustainability index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exponents {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for Exponents {
    fn default() -> Self {
        Self { a: 0.33, b: 0.33, c: 0.33 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SustainabilityInputs {
    /// Validation NRMSE.
    pub e_val: f64,
    /// Training energy in Wh.
    pub c_tr: f64,
    /// Exchanged data in MB.
    pub d_mb: f64,
    pub exponents: Exponents,
}

/// `S = (1 + E)^a · (1 + C)^b · (1 + D)^c`; lower is better.
pub fn sustainability_index(inputs: &SustainabilityInputs) -> Result<f64> {
    let SustainabilityInputs { e_val, c_tr, d_mb, exponents: Exponents { a, b, c } } = *inputs;
    for (name, v) in [("E_val", e_val), ("C_Tr", c_tr), ("D", d_mb), ("a", a), ("b", b), ("c", c)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("sustainability input {name} must be finite and >= 0, got {v}")));
        }
    }
    Ok((1.0 + e_val).powf(a) * (1.0 + c_tr).powf(b) * (1.0 + d_mb).powf(c))
}
