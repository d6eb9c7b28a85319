//! Ancestral sampling of series together with their hidden segmentations.
//!
//! Randomness comes from ChaCha8 seeded through `seed_from_u64`; uniforms take
//! the top 53 bits of `next_u64` and normals use Box-Muller, so a seed yields
//! the same bits on every platform.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::duration::DurationModel;
use crate::error::{Error, Result};
use crate::lattice::{Segment, Segmentation};
use crate::model::{Model, Series};

/// Seedable source of uniform, normal and categorical draws.
#[derive(Debug, Clone)]
pub struct SampleRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl SampleRng {
    pub fn seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + ((self.uniform() * (hi - lo + 1) as f64) as usize).min(hi - lo)
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Index drawn with probability proportional to `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let target = self.uniform() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last = i;
                if target < acc {
                    return i;
                }
            }
        }
        last
    }
}

/// Inverse-CDF sampler over the pmf used for inference.
#[derive(Debug, Clone)]
pub struct DurationSampler {
    lo: usize,
    pmf: Vec<f64>,
}

impl DurationSampler {
    pub fn new(dm: &DurationModel) -> Self {
        let (lo, _) = dm.support();
        let pmf = dm.log_pmf_table().iter().map(|lp| lp.exp()).collect();
        Self { lo, pmf }
    }

    pub fn draw(&self, rng: &mut SampleRng) -> usize {
        self.lo + rng.categorical(&self.pmf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub series: Series,
    pub segmentation: Segmentation,
    pub seed: u64,
}

/// 10 × the sum of the mean state durations, rounded up.
pub fn default_max_length(model: &Model) -> usize {
    let total: f64 = model.durations.iter().map(DurationModel::mean).sum();
    (10.0 * total).ceil().max(1.0) as usize
}

/// Draws one path: q₁ ∼ π, then durations, noisy regression samples and
/// successor states until an absorbing state is left or the next whole
/// segment would overrun `max_length`.
pub fn sample(model: &Model, seed: u64, max_length: usize) -> Result<SamplePath> {
    model.check()?;
    if max_length == 0 {
        return Err(Error::domain("max_length must be at least 1"));
    }
    let mut rng = SampleRng::seed(seed);
    let samplers: Vec<DurationSampler> = model.durations.iter().map(DurationSampler::new).collect();
    let mut values = Vec::new();
    let mut segments = Vec::new();
    let mut log_joint = 0.0;
    let mut state = rng.categorical(&model.pi);
    let mut entry = model.pi[state].ln();
    let mut phi = Vec::new();
    loop {
        let d = samplers[state].draw(&mut rng);
        if values.len() + d > max_length {
            if segments.is_empty() {
                return Err(Error::Infeasible(format!(
                    "first segment has {d} samples but max_length is {max_length}"
                )));
            }
            break;
        }
        let em = &model.emissions[state];
        let sd = em.precision.sqrt().recip();
        phi.resize(em.weights.len(), 0.0);
        let start = values.len();
        log_joint += entry + model.durations[state].log_pmf(d);
        for k in 0..d {
            model.basis.eval_at(model.basis.argument(k, d), &mut phi);
            let z = rng.normal();
            values.push(em.mean(&phi) + sd * z);
            log_joint += em.log_norm() - 0.5 * z * z;
        }
        segments.push(Segment {
            state,
            start,
            duration: d,
        });
        if model.is_absorbing(state) {
            break;
        }
        let next = rng.categorical(&model.trans[state]);
        entry = model.trans[state][next].ln();
        state = next;
    }
    Ok(SamplePath {
        series: Series::new(values, model.sampling_period)?,
        segmentation: Segmentation {
            segments,
            log_joint,
        },
        seed,
    })
}
