//! Synthetic models and signals for tests, benches and demos.

use crate::basis::{BasisConfig, BasisFamily};
use crate::duration::{DiscreteDuration, DurationFamily, DurationModel, GammaDuration};
use crate::error::Result;
use crate::generator::SampleRng;
use crate::model::{EmissionParams, Model, Series};

fn random_simplex(rng: &mut SampleRng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.range(0.05, 1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn random_duration(
    rng: &mut SampleRng,
    family: DurationFamily,
    max_support: usize,
) -> Result<DurationModel> {
    Ok(match family {
        DurationFamily::Discrete => {
            let width = rng.int(1, max_support);
            let d_min = rng.int(1, 1 + max_support - width);
            let pmf = random_simplex(rng, width);
            DurationModel::Discrete(DiscreteDuration::new(d_min, d_min + width - 1, pmf)?)
        }
        DurationFamily::Gamma => {
            let horizon = rng.int(1, max_support);
            DurationModel::Gamma(GammaDuration::new(
                rng.range(0.5, 6.0),
                rng.range(0.3, 3.0),
                horizon,
            )?)
        }
    })
}

/// Random model with `n` states and arbitrary (zero-diagonal) transitions,
/// durations supported on at most `max_support` values, and emissions of
/// order ≤ 3 over a random basis family. Some rows may be absorbing.
pub fn random_small_model(
    rng: &mut SampleRng,
    n: usize,
    family: DurationFamily,
    max_support: usize,
) -> Result<Model> {
    let basis = BasisConfig {
        family: if rng.uniform() < 0.5 {
            BasisFamily::HermiteOrthonormal
        } else {
            BasisFamily::Monomial
        },
        max_order: 3,
        scale: rng.range(0.5, 3.0),
        ..BasisConfig::default()
    };
    let pi = random_simplex(rng, n);
    let mut trans = vec![vec![0.0; n]; n];
    let mut mask = vec![vec![false; n]; n];
    for i in 0..n {
        if n == 1 || rng.uniform() < 0.2 {
            continue;
        }
        let row = random_simplex(rng, n - 1);
        let mut k = 0;
        for j in 0..n {
            if j != i {
                trans[i][j] = row[k];
                mask[i][j] = true;
                k += 1;
            }
        }
    }
    let mut durations = Vec::with_capacity(n);
    let mut emissions = Vec::with_capacity(n);
    for _ in 0..n {
        durations.push(random_duration(rng, family, max_support)?);
        let order = rng.int(0, 3);
        let weights = (0..=order).map(|_| rng.normal()).collect();
        emissions.push(EmissionParams::new(weights, rng.range(0.3, 4.0))?);
    }
    let model = Model {
        n_states: n,
        pi,
        trans,
        topology_mask: mask,
        durations,
        emissions,
        basis,
        sampling_period: 1.0,
    };
    model.check()?;
    Ok(model)
}

/// Standard-normal series of `len` samples.
pub fn noise_series(rng: &mut SampleRng, len: usize) -> Result<Series> {
    Series::new((0..len).map(|_| rng.normal()).collect(), 1.0)
}

/// Left-to-right model whose state `i` lasts about `means[i]` samples
/// (±`spread` relative), with order-2 Hermite emissions of the given precision.
pub fn random_left_to_right(
    rng: &mut SampleRng,
    means: &[usize],
    spread: f64,
    family: DurationFamily,
    precision: f64,
) -> Result<Model> {
    let horizon: usize = 2 * means.iter().sum::<usize>();
    let mut durations = Vec::with_capacity(means.len());
    let mut emissions = Vec::with_capacity(means.len());
    for &m in means {
        let half = ((m as f64 * spread).round() as usize).max(1);
        durations.push(match family {
            DurationFamily::Discrete => {
                let lo = m.saturating_sub(half).max(1);
                let hi = m + half;
                DurationModel::Discrete(DiscreteDuration::new(
                    lo,
                    hi,
                    random_simplex(rng, hi - lo + 1),
                )?)
            }
            DurationFamily::Gamma => {
                let sd = half as f64 / 2.0;
                let shape = (m as f64 / sd).powi(2);
                DurationModel::Gamma(GammaDuration::new(shape, shape / m as f64, horizon)?)
            }
        });
        let weights = (0..3).map(|_| rng.range(-1.0, 1.0)).collect();
        emissions.push(EmissionParams::new(weights, precision)?);
    }
    Model::left_to_right(durations, emissions, BasisConfig::default(), 1.0)
}

/// Beat morphologies for the recognition harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeatShape {
    /// P wave, narrow QRS spike, T wave.
    Normal,
    /// No P wave, wide biphasic QRS, inverted T wave.
    Ventricular,
}

fn bump(x: f64, centre: f64, width: f64, height: f64) -> f64 {
    let z = (x - centre) / width;
    height * (-0.5 * z * z).exp()
}

/// Noise-free beat of `len` samples.
pub fn beat(shape: BeatShape, len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| {
            let x = k as f64 / len as f64;
            match shape {
                BeatShape::Normal => {
                    bump(x, 0.15, 0.03, 0.15)
                        + bump(x, 0.33, 0.012, -0.12)
                        + bump(x, 0.36, 0.012, 1.0)
                        + bump(x, 0.39, 0.012, -0.25)
                        + bump(x, 0.65, 0.05, 0.3)
                }
                BeatShape::Ventricular => {
                    bump(x, 0.32, 0.05, 0.8)
                        + bump(x, 0.45, 0.06, -0.6)
                        + bump(x, 0.72, 0.06, -0.25)
                }
            }
        })
        .collect()
}

/// Concatenated beats with additive Gaussian noise of standard deviation
/// `noise`; returns the strip and the 0-based start of every beat.
pub fn beat_strip(
    shapes: &[BeatShape],
    len: usize,
    noise: f64,
    rng: &mut SampleRng,
) -> Result<(Series, Vec<usize>)> {
    let mut values = Vec::with_capacity(shapes.len() * len);
    let mut starts = Vec::with_capacity(shapes.len());
    for &s in shapes {
        starts.push(values.len());
        values.extend(beat(s, len).into_iter().map(|v| v + noise * rng.normal()));
    }
    Ok((Series::new(values, 1.0 / 360.0)?, starts))
}
