//! Training-time report over three duration settings per series:
//! unbounded discrete, bounded discrete and Gamma.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::duration::DurationFamily;
use crate::model::Series;
use crate::train::{default_iters, fit, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    Discrete,
    DiscreteBounded,
    Gamma,
}

impl BenchMode {
    pub const ALL: [BenchMode; 3] = [
        BenchMode::Discrete,
        BenchMode::DiscreteBounded,
        BenchMode::Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMode::Discrete => "discrete",
            BenchMode::DiscreteBounded => "discrete_bounded",
            BenchMode::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub orders: Vec<usize>,
    /// Per-state bounds; `None` derives ±50% windows around an equal split.
    pub bounds: Option<Vec<(usize, usize)>>,
    pub discrete_iters: usize,
    pub gamma_iters: usize,
    /// Run cells concurrently. Timings are then contended; keep off for reporting.
    pub parallel: bool,
}

impl BenchSpec {
    pub fn new(orders: Vec<usize>) -> Self {
        Self {
            orders,
            bounds: None,
            discrete_iters: default_iters(DurationFamily::Discrete),
            gamma_iters: default_iters(DurationFamily::Gamma),
            parallel: false,
        }
    }

    fn config(&self, mode: BenchMode, len: usize) -> TrainConfig {
        let n = self.orders.len();
        let bounds = self
            .bounds
            .clone()
            .unwrap_or_else(|| default_bounds(len, n));
        let (family, iters, bounded) = match mode {
            BenchMode::Discrete => (DurationFamily::Discrete, self.discrete_iters, false),
            BenchMode::DiscreteBounded => (DurationFamily::Discrete, self.discrete_iters, true),
            BenchMode::Gamma => (DurationFamily::Gamma, self.gamma_iters, true),
        };
        let mut cfg = TrainConfig::new(self.orders.clone(), family);
        if bounded {
            cfg.bounds = Some(bounds);
        }
        cfg.max_iters = iters;
        // fixed iteration budget per cell
        cfg.loglik_tol = 0.0;
        cfg
    }
}

/// `[⌈L/2⌉, ⌊3L/2⌋]` around the equal-split length `L = len / n`, clipped to `[1, len]`.
pub fn default_bounds(len: usize, n: usize) -> Vec<(usize, usize)> {
    let l = (len / n).max(1);
    let lo = l.div_ceil(2).max(1);
    let hi = (3 * l / 2).clamp(lo, len);
    vec![(lo, hi); n]
}

#[derive(Debug, Clone)]
pub struct BenchCell {
    pub series: String,
    pub mode: BenchMode,
    pub iterations: usize,
    pub millis: f64,
    /// Final log-likelihood, or the error that stopped the fit.
    pub outcome: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    /// Row-major: series in input order, then modes in [`BenchMode::ALL`] order.
    pub cells: Vec<BenchCell>,
}

fn run_cell(name: &str, series: &Series, mode: BenchMode, spec: &BenchSpec) -> BenchCell {
    let cfg = spec.config(mode, series.len());
    let clock = Instant::now();
    let result = fit(series, &cfg);
    let millis = clock.elapsed().as_secs_f64() * 1e3;
    let (iterations, outcome) = match result {
        Ok((_, trace)) => (
            trace.iterations(),
            Ok(*trace.logliks.last().unwrap_or(&f64::NAN)),
        ),
        Err(e) => {
            log::warn!("{name} / {}: {e}", mode.name());
            (0, Err(e.to_string()))
        }
    };
    BenchCell {
        series: name.to_owned(),
        mode,
        iterations,
        millis,
        outcome,
    }
}

/// Fits every (series, mode) cell; errors are recorded per cell.
pub fn run_bench(inputs: &[(String, Series)], spec: &BenchSpec) -> BenchReport {
    let jobs: Vec<(usize, BenchMode)> = (0..inputs.len())
        .flat_map(|i| BenchMode::ALL.into_iter().map(move |m| (i, m)))
        .collect();
    let run = |&(i, m): &(usize, BenchMode)| run_cell(&inputs[i].0, &inputs[i].1, m, spec);
    let cells = if spec.parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };
    BenchReport { cells }
}

/// `H:MM:SS.mmm`.
pub fn format_hms(millis: f64) -> String {
    let total = millis.max(0.0).round() as u64;
    let (ms, s) = (total % 1000, total / 1000);
    format!("{}:{:02}:{:02}.{:03}", s / 3600, (s / 60) % 60, s % 60, ms)
}

impl BenchReport {
    pub fn cell(&self, series: &str, mode: BenchMode) -> Option<&BenchCell> {
        self.cells
            .iter()
            .find(|c| c.series == series && c.mode == mode)
    }

    /// One row per series, one wall-time column per mode; failed cells read `error`.
    pub fn table_csv(&self) -> String {
        let mut out = String::from("series,discrete,discrete_bounded,gamma\n");
        for row in self.cells.chunks(BenchMode::ALL.len()) {
            let _ = write!(out, "{}", row[0].series);
            for c in row {
                match c.outcome {
                    Ok(_) => {
                        let _ = write!(out, ",{}", format_hms(c.millis));
                    }
                    Err(_) => out.push_str(",error"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// One row per cell: `series,mode,iterations,millis,loglik`.
    pub fn long_csv(&self) -> String {
        let mut out = String::from("series,mode,iterations,millis,loglik\n");
        for c in &self.cells {
            let ll = match &c.outcome {
                Ok(v) => v.to_string(),
                Err(_) => "error".into(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{:.3},{}",
                c.series,
                c.mode.name(),
                c.iterations,
                c.millis,
                ll
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hms_format() {
        assert_eq!(format_hms(378_305.0), "0:06:18.305");
        assert_eq!(format_hms(38_683.4), "0:00:38.683");
        assert_eq!(format_hms(3_600_000.0 + 61_001.0), "1:01:01.001");
    }

    #[test]
    fn default_bounds_bracket_equal_split() {
        assert_eq!(default_bounds(300, 7), vec![(21, 63); 7]);
        assert_eq!(default_bounds(3, 3), vec![(1, 1); 3]);
    }
}
