#![allow(dead_code)]

use ecoforecast::data::{generate_synthetic, prepare_station, Dataset, SplitRatios, StationSeries, SyntheticSpec};

pub fn station(id: &str, days: u32, seed: u64) -> StationSeries {
    generate_synthetic(&SyntheticSpec::station_preset(id, days, seed)).unwrap()
}

pub fn dataset(days: u32, seed: u64) -> Dataset {
    prepare_station(&station("LesCorts", days, seed), 10, SplitRatios::default()).unwrap()
}
