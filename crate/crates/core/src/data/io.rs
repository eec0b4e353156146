use std::fs::File;
use std::path::Path;

use super::{RawRecord, StationSeries, FEATURE_NAMES, N_FEATURES};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "timestamp,down_link,up_link,rnti_count,rb_up,rb_down,rb_up_var,rb_down_var,mcs_up,mcs_down,mcs_up_var,mcs_down_var";

const DEFAULT_INTERVAL_SECONDS: u32 = 120;

/// Reads one station from a CSV file. Columns are matched by name, so any
/// column order is accepted; the station id is the file stem.
pub fn load_csv(path: impl AsRef<Path>) -> Result<StationSeries> {
    let path = path.as_ref();
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();

    let mut ts_col = None;
    let mut feature_cols = [usize::MAX; N_FEATURES];
    for (i, name) in headers.iter().enumerate() {
        if name == "timestamp" {
            if ts_col.replace(i).is_some() {
                return Err(schema("duplicate column `timestamp`".into()));
            }
        } else if let Some(f) = FEATURE_NAMES.iter().position(|&n| n == name) {
            if feature_cols[f] != usize::MAX {
                return Err(schema(format!("duplicate column `{name}`")));
            }
            feature_cols[f] = i;
        } else {
            return Err(schema(format!("unknown column `{name}`")));
        }
    }
    let ts_col = ts_col.ok_or_else(|| schema("missing column `timestamp`".into()))?;
    if let Some(f) = feature_cols.iter().position(|&c| c == usize::MAX) {
        return Err(schema(format!("missing column `{}`", FEATURE_NAMES[f])));
    }

    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let cell = |col: usize, name: &str| -> Result<f64> {
            let raw = rec.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|e| Error::Parse {
                row,
                column: name.to_string(),
                message: format!("`{raw}`: {e}"),
            })
        };
        let ts_raw = rec.get(ts_col).unwrap_or("");
        let timestamp = ts_raw.parse::<i64>().map_err(|e| Error::Parse {
            row,
            column: "timestamp".into(),
            message: format!("`{ts_raw}`: {e}"),
        })?;
        let mut features = [0.0; N_FEATURES];
        for (f, slot) in features.iter_mut().enumerate() {
            *slot = cell(feature_cols[f], FEATURE_NAMES[f])?;
        }
        let record = RawRecord { timestamp, features };
        record.validate().map_err(|message| Error::Parse {
            row,
            column: "features".into(),
            message,
        })?;
        if let Some(prev) = records.last().map(|r: &RawRecord| r.timestamp) {
            if timestamp <= prev {
                return Err(Error::Ordering { row });
            }
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(schema("no data rows".into()));
    }
    let interval = match records.as_slice() {
        [a, b, ..] => u32::try_from(b.timestamp - a.timestamp)
            .map_err(|_| schema("sampling interval does not fit in u32 seconds".into()))?,
        _ => DEFAULT_INTERVAL_SECONDS,
    };
    let station = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("station")
        .to_string();
    StationSeries::new(station, interval, records)
}

/// Writes a station in the canonical column order. Values use the shortest
/// representation that parses back to the same bits.
pub fn write_csv(series: &StationSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(CSV_HEADER.split(','))?;
    for r in series.records() {
        let mut fields = Vec::with_capacity(N_FEATURES + 1);
        fields.push(r.timestamp.to_string());
        fields.extend(r.features.iter().map(|v| v.to_string()));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}
