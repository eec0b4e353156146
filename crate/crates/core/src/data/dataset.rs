use serde::{Deserialize, Serialize};

use super::{
    chronological_split, fit_normalizer, make_windows, NormStats, SplitRatios, StationSeries, WindowedSample,
    TARGET_INDICES,
};
use crate::error::{Error, Result};

/// Normalized train/val/test windows plus the statistics that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub train: Vec<WindowedSample>,
    pub val: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
    pub stats: NormStats,
    /// Size of the raw series behind this dataset.
    pub raw_bytes: u64,
}

fn split_station(
    series: &StationSeries,
    window: usize,
    ratios: SplitRatios,
) -> Result<super::Split<WindowedSample>> {
    let samples = make_windows(series, window, &TARGET_INDICES)?;
    let split = chronological_split(&samples, ratios)?;
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(Error::Config(format!(
            "station {} yields an empty split {:?}",
            series.station_id(),
            split.sizes()
        )));
    }
    Ok(split)
}

fn finish(name: String, train: Vec<WindowedSample>, val: Vec<WindowedSample>, test: Vec<WindowedSample>, raw_bytes: u64) -> Result<Dataset> {
    let stats = fit_normalizer(&train, &TARGET_INDICES)?;
    Ok(Dataset {
        name,
        train: stats.apply(&train),
        val: stats.apply(&val),
        test: stats.apply(&test),
        stats,
        raw_bytes,
    })
}

/// Window, split and normalize one station on its own statistics.
pub fn prepare_station(series: &StationSeries, window: usize, ratios: SplitRatios) -> Result<Dataset> {
    let s = split_station(series, window, ratios)?;
    finish(series.station_id().to_string(), s.train, s.val, s.test, series.byte_size())
}

/// Split every station chronologically, then pool the splits and normalize
/// on the pooled training split. Windows never straddle two stations.
pub fn prepare_pooled(series: &[StationSeries], window: usize, ratios: SplitRatios) -> Result<Dataset> {
    if series.is_empty() {
        return Err(Error::Config("no stations to pool".into()));
    }
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for s in series {
        let split = split_station(s, window, ratios)?;
        train.extend(split.train);
        val.extend(split.val);
        test.extend(split.test);
    }
    let bytes = series.iter().map(StationSeries::byte_size).sum();
    finish("pooled".into(), train, val, test, bytes)
}
