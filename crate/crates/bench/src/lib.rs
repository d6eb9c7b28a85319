//! Fixtures shared by the benchmarks.

use plhmm_core::synth::{beat, BeatShape};
use plhmm_core::{initialize, DurationFamily, Model, SampleRng, Series, TrainConfig};

pub const ORDERS: [usize; 7] = [3, 5, 1, 6, 1, 5, 3];

/// A noisy synthetic beat of `len` samples.
pub fn noisy_beat(len: usize, seed: u64) -> Series {
    let mut rng = SampleRng::seed(seed);
    let values = beat(BeatShape::Normal, len)
        .iter()
        .map(|v| v + 0.02 * rng.normal())
        .collect();
    Series::new(values, 1.0 / 360.0).unwrap()
}

pub fn config(family: DurationFamily, bounds: Option<Vec<(usize, usize)>>) -> TrainConfig {
    let mut cfg = TrainConfig::new(ORDERS.to_vec(), family);
    cfg.bounds = bounds;
    cfg
}

/// Initial model for `series` under `cfg`.
pub fn initial(series: &Series, cfg: &TrainConfig) -> Model {
    initialize(series, cfg).unwrap()
}
