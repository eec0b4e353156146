//! Traffic series ingestion, windowing, chronological splits and scaling.

mod dataset;
mod io;
mod scale;
mod synthetic;
mod window;

pub use dataset::{prepare_pooled, prepare_station, Dataset};
pub use io::{load_csv, write_csv, CSV_HEADER};
pub use scale::{fit_normalizer, NormStats};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use window::{chronological_split, make_windows, Split, SplitRatios};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_FEATURES: usize = 11;
pub const N_TARGETS: usize = 5;

/// Column names in storage order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "down_link",
    "up_link",
    "rnti_count",
    "rb_up",
    "rb_down",
    "rb_up_var",
    "rb_down_var",
    "mcs_up",
    "mcs_down",
    "mcs_up_var",
    "mcs_down_var",
];

/// DownLink, UpLink, RNTI Count, RB Up, RB Down.
pub const TARGET_INDICES: [usize; N_TARGETS] = [0, 1, 2, 3, 4];

/// Normalized-variance columns, which must be non-negative.
pub const VARIANCE_INDICES: [usize; 4] = [5, 6, 9, 10];

pub type FeatureRow = [f64; N_FEATURES];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub timestamp: i64,
    pub features: FeatureRow,
}

impl RawRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if let Some(i) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(format!("{} is not finite", FEATURE_NAMES[i]));
        }
        for &i in &VARIANCE_INDICES {
            if self.features[i] < 0.0 {
                return Err(format!("{} must be >= 0, got {}", FEATURE_NAMES[i], self.features[i]));
            }
        }
        Ok(())
    }
}

/// One base station's multivariate series, rows in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSeries {
    station_id: String,
    interval_seconds: u32,
    timestamps: Vec<i64>,
    rows: Vec<FeatureRow>,
}

impl StationSeries {
    pub fn new(station_id: impl Into<String>, interval_seconds: u32, records: Vec<RawRecord>) -> Result<Self> {
        if interval_seconds == 0 {
            return Err(Error::Config("interval_seconds must be positive".into()));
        }
        if records.is_empty() {
            return Err(Error::Config("a station series needs at least one row".into()));
        }
        for (i, r) in records.iter().enumerate() {
            r.validate().map_err(|message| Error::Parse {
                row: i + 1,
                column: "features".into(),
                message,
            })?;
            if i > 0 && r.timestamp <= records[i - 1].timestamp {
                return Err(Error::Ordering { row: i + 1 });
            }
        }
        Ok(Self {
            station_id: station_id.into(),
            interval_seconds,
            timestamps: records.iter().map(|r| r.timestamp).collect(),
            rows: records.iter().map(|r| r.features).collect(),
        })
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn interval_seconds(&self) -> u32 {
        self.interval_seconds
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        N_FEATURES
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn records(&self) -> impl Iterator<Item = RawRecord> + '_ {
        self.timestamps
            .iter()
            .zip(&self.rows)
            .map(|(&timestamp, &features)| RawRecord { timestamp, features })
    }

    /// Size of the raw matrix when shipped as 64-bit reals.
    pub fn byte_size(&self) -> u64 {
        (self.rows.len() * N_FEATURES * 8) as u64
    }
}

/// Past window of `S` rows and the next-step targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSample {
    pub x: Vec<FeatureRow>,
    pub y: Vec<f64>,
}

impl WindowedSample {
    pub fn window(&self) -> usize {
        self.x.len()
    }

    /// Row-major `S·d` view of the input window.
    pub fn flat_x(&self) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().flat_map(|r| r.iter().copied())
    }
}
