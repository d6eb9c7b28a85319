//! Exhaustive enumeration of state/duration tilings.
//!
//! Exponential in the series length; it exists as a reference for the
//! lattice recursions on tiny problems.

use crate::error::{Error, Result};
use crate::lattice::{Segment, Segmentation};
use crate::logspace::logsumexp;
use crate::model::{segment_log_likelihood, Model, Series};

pub const MAX_STATES: usize = 4;
pub const MAX_LEN: usize = 12;

/// Every segmentation with nonzero joint density, with its log joint density.
pub fn enumerate_segmentations(model: &Model, series: &Series) -> Result<Vec<Segmentation>> {
    let (n, len) = (model.n_states, series.len());
    if n > MAX_STATES || len > MAX_LEN {
        return Err(Error::SizeGuard { n_states: n, len });
    }
    let log_pmf: Vec<Vec<f64>> = model
        .durations
        .iter()
        .map(|dm| (0..=len).map(|d| dm.log_pmf(d)).collect())
        .collect();
    let mut out = Vec::new();
    let mut path = Vec::new();
    let ctx = Ctx {
        model,
        series,
        log_pmf: &log_pmf,
    };
    for j in 0..n {
        let lp = model.pi[j].ln();
        if lp > f64::NEG_INFINITY {
            ctx.extend(j, 0, lp, &mut path, &mut out)?;
        }
    }
    Ok(out)
}

struct Ctx<'a> {
    model: &'a Model,
    series: &'a Series,
    log_pmf: &'a [Vec<f64>],
}

impl Ctx<'_> {
    /// Appends every segment of `state` starting at `start`, then recurses.
    fn extend(
        &self,
        state: usize,
        start: usize,
        score: f64,
        path: &mut Vec<Segment>,
        out: &mut Vec<Segmentation>,
    ) -> Result<()> {
        let len = self.series.len();
        for d in 1..=len - start {
            let lp = self.log_pmf[state][d];
            if lp == f64::NEG_INFINITY {
                continue;
            }
            let samples = &self.series.values[start..start + d];
            let seg = segment_log_likelihood(
                &self.model.emissions[state],
                &self.model.basis,
                samples,
                d,
            )?;
            let s = score + lp + seg;
            path.push(Segment {
                state,
                start,
                duration: d,
            });
            if start + d == len {
                out.push(Segmentation {
                    segments: path.clone(),
                    log_joint: s,
                });
            } else {
                for (next, &a) in self.model.trans[state].iter().enumerate() {
                    if next != state && a > 0.0 {
                        self.extend(next, start + d, s + a.ln(), path, out)?;
                    }
                }
            }
            path.pop();
        }
        Ok(())
    }
}

/// ln P(v | λ) as an explicit sum over all state and duration sequences.
pub fn brute_force_loglik(model: &Model, series: &Series) -> Result<f64> {
    let all = enumerate_segmentations(model, series)?;
    let scores: Vec<f64> = all.iter().map(|s| s.log_joint).collect();
    Ok(logsumexp(&scores))
}
