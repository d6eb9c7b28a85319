//! Log-domain forward–backward over the duration-explicit lattice.
//!
//! Time indices are segment boundaries: `t = 0` is before the first sample and
//! `t = T` after the last. `α_t(j)` is the joint density of `v_1..v_t` with a
//! segment of state `j` ending exactly at `t`; `β_t(j)` is the density of
//! `v_{t+1}..v_T` given that boundary. A segment `(j, t, d)` covers samples
//! `t−d+1..=t` (1-based), i.e. `values[t−d..t]`.

use serde::{Deserialize, Serialize};

use crate::duration::DurationStats;
use crate::error::{Error, Result};
use crate::logspace::LogSum;
use crate::model::{Model, Series};

/// Relative margin a score must exceed the incumbent by to replace it in
/// max-product recursions; keeps tie-breaking independent of rounding noise.
const TIE_EPS: f64 = 1e-12;

#[inline]
fn beats(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + TIE_EPS * incumbent.abs().max(1.0)
}

/// Per-state segment log-likelihoods and duration log-pmfs over the searched bounds.
#[derive(Debug, Clone)]
pub struct SegmentTable {
    len: usize,
    /// Searched `[d_min, d_max]` per state, `d_max` clipped to the series length.
    /// `d_max < d_min` marks a state that cannot fit at all.
    bounds: Vec<(usize, usize)>,
    log_dur: Vec<Vec<f64>>,
    /// `emis[j][(t−1)·width_j + (d − d_min_j)]`, `-inf` where `d > t`.
    emis: Vec<Vec<f64>>,
}

impl SegmentTable {
    pub fn new(model: &Model, series: &Series) -> Result<Self> {
        let len = series.len();
        let v = &series.values;
        let mut bounds = Vec::with_capacity(model.n_states);
        let mut log_dur = Vec::with_capacity(model.n_states);
        let mut emis = Vec::with_capacity(model.n_states);
        for j in 0..model.n_states {
            let dm = &model.durations[j];
            let (lo, hi_full) = dm.support();
            let hi = hi_full.min(len);
            let table = dm.log_pmf_table();
            bounds.push((lo, hi));
            if hi < lo {
                log_dur.push(Vec::new());
                emis.push(Vec::new());
                continue;
            }
            let width = hi - lo + 1;
            log_dur.push(table[..width].to_vec());

            let em = &model.emissions[j];
            let cols = em.weights.len();
            let log_norm = em.log_norm();
            let half_beta = 0.5 * em.precision;
            let mut out = vec![f64::NEG_INFINITY; len * width];
            let mut template = Vec::with_capacity(hi);
            let mut phi = vec![0.0; cols];
            for d in lo..=hi {
                template.clear();
                for k in 0..d {
                    model.basis.eval_at(model.basis.argument(k, d), &mut phi);
                    template.push(em.mean(&phi));
                }
                let base = d as f64 * log_norm;
                for t in d..=len {
                    let seg = &v[t - d..t];
                    let ss: f64 = seg
                        .iter()
                        .zip(&template)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    out[(t - 1) * width + (d - lo)] = base - half_beta * ss;
                }
            }
            emis.push(out);
        }
        Ok(Self {
            len,
            bounds,
            log_dur,
            emis,
        })
    }

    pub fn bounds(&self) -> &[(usize, usize)] {
        &self.bounds
    }

    /// Durations searched for state `j` when a segment ends at `t`.
    #[inline]
    fn durations(&self, j: usize, t: usize) -> std::ops::RangeInclusive<usize> {
        let (lo, hi) = self.bounds[j];
        lo..=hi.min(t)
    }

    /// ln p_j(d) + Σ ln b_j over the segment `(j, t, d)`.
    #[inline]
    pub fn segment_score(&self, j: usize, t: usize, d: usize) -> f64 {
        let (lo, hi) = self.bounds[j];
        let width = hi - lo + 1;
        self.log_dur[j][d - lo] + self.emis[j][(t - 1) * width + (d - lo)]
    }

    /// Σ ln b_j over the segment `(j, t, d)` without the duration term.
    #[inline]
    pub fn emission_score(&self, j: usize, t: usize, d: usize) -> f64 {
        let (lo, hi) = self.bounds[j];
        self.emis[j][(t - 1) * (hi - lo + 1) + (d - lo)]
    }
}

/// Forward and/or backward tables and the total log-likelihood.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub n_states: usize,
    pub len: usize,
    /// `(len+1) × n_states`, row `t` is boundary `t`; empty when not computed.
    pub log_alpha: Vec<f64>,
    /// `(len+1) × n_states`; empty when not computed.
    pub log_beta: Vec<f64>,
    pub log_likelihood: f64,
    pub duration_bounds: Vec<(usize, usize)>,
}

impl Lattice {
    pub fn alpha(&self, t: usize, j: usize) -> f64 {
        self.log_alpha[t * self.n_states + j]
    }

    pub fn beta(&self, t: usize, j: usize) -> f64 {
        self.log_beta[t * self.n_states + j]
    }
}

/// Posterior weight that state `state` occupied exactly samples `end−duration+1..=end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanPosterior {
    pub state: usize,
    pub end: usize,
    pub duration: usize,
    pub weight: f64,
}

impl SpanPosterior {
    /// 0-based index of the first covered sample.
    pub fn start(&self) -> usize {
        self.end - self.duration
    }
}

#[derive(Debug, Clone)]
pub struct PosteriorStats {
    /// Expected number of sequences starting in each state.
    pub init: Vec<f64>,
    /// Expected number of i→j transitions.
    pub trans: Vec<Vec<f64>>,
    pub dur: Vec<DurationStats>,
    /// Spans with nonzero posterior weight.
    pub spans: Vec<SpanPosterior>,
    /// `occupancy[t][j]`: posterior that sample t (0-based) belongs to state j.
    pub occupancy: Vec<Vec<f64>>,
    pub log_likelihood: f64,
}

/// One segment of a state path; `start` is the 0-based first sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub state: usize,
    pub start: usize,
    pub duration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub segments: Vec<Segment>,
    pub log_joint: f64,
}

impl Segmentation {
    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

/// Shared state for repeated inference on one `(model, series)` pair.
pub struct Inference<'a> {
    model: &'a Model,
    table: SegmentTable,
    log_pi: Vec<f64>,
    log_trans: Vec<f64>,
}

impl<'a> Inference<'a> {
    pub fn new(model: &'a Model, series: &Series) -> Result<Self> {
        let n = model.n_states;
        let table = SegmentTable::new(model, series)?;
        let log_pi = model.pi.iter().map(|p| p.ln()).collect();
        let log_trans = (0..n * n).map(|k| model.trans[k / n][k % n].ln()).collect();
        Ok(Self {
            model,
            table,
            log_pi,
            log_trans,
        })
    }

    pub fn table(&self) -> &SegmentTable {
        &self.table
    }

    fn n(&self) -> usize {
        self.model.n_states
    }

    fn len(&self) -> usize {
        self.table.len
    }

    #[inline]
    fn log_a(&self, i: usize, j: usize) -> f64 {
        self.log_trans[i * self.n() + j]
    }

    /// `entry[s][j]`: log-probability of entering state j right after boundary s,
    /// π_j at s = 0 and Σ_i α_s(i) a_ij otherwise.
    fn entry_table(&self, log_alpha: &[f64]) -> Vec<f64> {
        let (n, len) = (self.n(), self.len());
        let mut entry = vec![f64::NEG_INFINITY; len * n];
        entry[..n].copy_from_slice(&self.log_pi);
        for s in 1..len {
            for j in 0..n {
                let mut acc = LogSum::new();
                for i in 0..n {
                    acc.add(log_alpha[s * n + i] + self.log_a(i, j));
                }
                entry[s * n + j] = acc.value();
            }
        }
        entry
    }

    /// `exit[s][j]`: log-density of a segment of state j starting after boundary
    /// s together with everything after it.
    fn exit_table(&self, log_beta: &[f64]) -> Vec<f64> {
        let (n, len) = (self.n(), self.len());
        let mut exit = vec![f64::NEG_INFINITY; len * n];
        for s in 0..len {
            for j in 0..n {
                exit[s * n + j] = self.exit_at(log_beta, s, j);
            }
        }
        exit
    }

    #[inline]
    fn exit_at(&self, log_beta: &[f64], s: usize, j: usize) -> f64 {
        let n = self.n();
        let (lo, hi) = self.table.bounds[j];
        let mut acc = LogSum::new();
        for d in lo..=hi.min(self.len() - s) {
            let t = s + d;
            acc.add(self.table.segment_score(j, t, d) + log_beta[t * n + j]);
        }
        acc.value()
    }

    pub fn forward(&self) -> Result<Lattice> {
        let (n, len) = (self.n(), self.len());
        let mut alpha = vec![f64::NEG_INFINITY; (len + 1) * n];
        let mut entry = vec![f64::NEG_INFINITY; len * n];
        entry[..n].copy_from_slice(&self.log_pi);
        for t in 1..=len {
            for j in 0..n {
                let mut acc = LogSum::new();
                for d in self.table.durations(j, t) {
                    acc.add(entry[(t - d) * n + j] + self.table.segment_score(j, t, d));
                }
                alpha[t * n + j] = acc.value();
            }
            if t < len {
                for j in 0..n {
                    let mut acc = LogSum::new();
                    for i in 0..n {
                        acc.add(alpha[t * n + i] + self.log_a(i, j));
                    }
                    entry[t * n + j] = acc.value();
                }
            }
        }
        let mut total = LogSum::new();
        for j in 0..n {
            total.add(alpha[len * n + j]);
        }
        let ll = total.value();
        if ll == f64::NEG_INFINITY || ll.is_nan() {
            return Err(Error::ImpossibleSeries { len });
        }
        Ok(Lattice {
            n_states: n,
            len,
            log_alpha: alpha,
            log_beta: Vec::new(),
            log_likelihood: ll,
            duration_bounds: self.table.bounds.clone(),
        })
    }

    /// Backward tables; `log_likelihood` is recombined from the initial segments.
    pub fn backward(&self) -> Result<Lattice> {
        let (n, len) = (self.n(), self.len());
        let mut beta = vec![f64::NEG_INFINITY; (len + 1) * n];
        for i in 0..n {
            beta[len * n + i] = 0.0;
        }
        let mut exit = vec![f64::NEG_INFINITY; n];
        for s in (0..len).rev() {
            for (j, e) in exit.iter_mut().enumerate() {
                *e = self.exit_at(&beta, s, j);
            }
            if s == 0 {
                break;
            }
            for i in 0..n {
                let mut acc = LogSum::new();
                for (j, &e) in exit.iter().enumerate() {
                    acc.add(self.log_a(i, j) + e);
                }
                beta[s * n + i] = acc.value();
            }
        }
        let mut total = LogSum::new();
        for (j, &e) in exit.iter().enumerate() {
            total.add(self.log_pi[j] + e);
        }
        let ll = total.value();
        if ll == f64::NEG_INFINITY || ll.is_nan() {
            return Err(Error::ImpossibleSeries { len });
        }
        Ok(Lattice {
            n_states: n,
            len,
            log_alpha: Vec::new(),
            log_beta: beta,
            log_likelihood: ll,
            duration_bounds: self.table.bounds.clone(),
        })
    }

    pub fn forward_backward(&self) -> Result<Lattice> {
        let fwd = self.forward()?;
        let bwd = self.backward()?;
        Ok(Lattice {
            log_beta: bwd.log_beta,
            ..fwd
        })
    }

    pub fn posteriors(&self, lat: &Lattice) -> Result<PosteriorStats> {
        let (n, len) = (self.n(), self.len());
        if lat.n_states != n
            || lat.len != len
            || lat.log_alpha.len() != (len + 1) * n
            || lat.log_beta.len() != (len + 1) * n
            || lat.duration_bounds != self.table.bounds
        {
            return Err(Error::domain(
                "lattice does not match this model and series",
            ));
        }
        let ll = lat.log_likelihood;
        let entry = self.entry_table(&lat.log_alpha);
        let exit = self.exit_table(&lat.log_beta);

        let init: Vec<f64> = (0..n)
            .map(|i| (self.log_pi[i] + exit[i] - ll).exp())
            .collect();
        let mut trans = vec![vec![0.0; n]; n];
        for s in 1..len {
            for i in 0..n {
                let a = lat.log_alpha[s * n + i];
                if a == f64::NEG_INFINITY {
                    continue;
                }
                for j in 0..n {
                    trans[i][j] += (a + self.log_a(i, j) + exit[s * n + j] - ll).exp();
                }
            }
        }

        let mut dur = vec![DurationStats::default(); n];
        let mut spans = Vec::new();
        let mut diff = vec![vec![0.0; n]; len + 1];
        for t in 1..=len {
            for j in 0..n {
                let b = lat.log_beta[t * n + j];
                if b == f64::NEG_INFINITY {
                    continue;
                }
                for d in self.table.durations(j, t) {
                    let lw = entry[(t - d) * n + j] + self.table.segment_score(j, t, d) + b - ll;
                    let w = lw.exp();
                    if w > 0.0 {
                        dur[j].add(d, w);
                        spans.push(SpanPosterior {
                            state: j,
                            end: t,
                            duration: d,
                            weight: w,
                        });
                        diff[t - d][j] += w;
                        diff[t][j] -= w;
                    }
                }
            }
        }
        let mut occupancy = vec![vec![0.0; n]; len];
        let mut run = vec![0.0; n];
        for (t, row) in occupancy.iter_mut().enumerate() {
            for j in 0..n {
                run[j] += diff[t][j];
                row[j] = run[j];
            }
        }
        Ok(PosteriorStats {
            init,
            trans,
            dur,
            spans,
            occupancy,
            log_likelihood: ll,
        })
    }

    /// Maximum joint-density segmentation.
    ///
    /// Ties go to the earliest boundary, then the lowest state index.
    pub fn viterbi(&self) -> Result<Segmentation> {
        let (n, len) = (self.n(), self.len());
        let mut delta = vec![f64::NEG_INFINITY; (len + 1) * n];
        // (duration, predecessor state or usize::MAX for the initial segment)
        let mut back = vec![(0usize, usize::MAX); (len + 1) * n];
        let mut entry = vec![(f64::NEG_INFINITY, usize::MAX); len * n];
        for j in 0..n {
            entry[j] = (self.log_pi[j], usize::MAX);
        }
        for t in 1..=len {
            for j in 0..n {
                let mut best = (f64::NEG_INFINITY, 0, usize::MAX);
                // longest duration first: earliest boundary wins ties
                for d in self.table.durations(j, t).rev() {
                    let (e, pred) = entry[(t - d) * n + j];
                    let score = e + self.table.segment_score(j, t, d);
                    if score > f64::NEG_INFINITY
                        && (best.0 == f64::NEG_INFINITY || beats(score, best.0))
                    {
                        best = (score, d, pred);
                    }
                }
                delta[t * n + j] = best.0;
                back[t * n + j] = (best.1, best.2);
            }
            if t < len {
                for j in 0..n {
                    let mut best = (f64::NEG_INFINITY, usize::MAX);
                    for i in 0..n {
                        let score = delta[t * n + i] + self.log_a(i, j);
                        if score > f64::NEG_INFINITY
                            && (best.0 == f64::NEG_INFINITY || beats(score, best.0))
                        {
                            best = (score, i);
                        }
                    }
                    entry[t * n + j] = best;
                }
            }
        }
        let mut last = (f64::NEG_INFINITY, usize::MAX);
        for j in 0..n {
            let score = delta[len * n + j];
            if score > f64::NEG_INFINITY && (last.0 == f64::NEG_INFINITY || beats(score, last.0)) {
                last = (score, j);
            }
        }
        if last.1 == usize::MAX {
            return Err(Error::ImpossibleSeries { len });
        }
        let mut segments = Vec::new();
        let (mut t, mut j) = (len, last.1);
        loop {
            let (d, pred) = back[t * n + j];
            segments.push(Segment {
                state: j,
                start: t - d,
                duration: d,
            });
            t -= d;
            if pred == usize::MAX {
                break;
            }
            j = pred;
        }
        debug_assert_eq!(t, 0);
        segments.reverse();
        Ok(Segmentation {
            segments,
            log_joint: last.0,
        })
    }
}

pub fn forward(model: &Model, series: &Series) -> Result<Lattice> {
    Inference::new(model, series)?.forward()
}

pub fn backward(model: &Model, series: &Series) -> Result<Lattice> {
    Inference::new(model, series)?.backward()
}

pub fn forward_backward(model: &Model, series: &Series) -> Result<Lattice> {
    Inference::new(model, series)?.forward_backward()
}

pub fn posteriors(model: &Model, series: &Series, lat: &Lattice) -> Result<PosteriorStats> {
    Inference::new(model, series)?.posteriors(lat)
}

pub fn viterbi(model: &Model, series: &Series) -> Result<Segmentation> {
    Inference::new(model, series)?.viterbi()
}

/// Forward log-likelihood, `-inf` when no tiling is feasible.
pub fn log_likelihood(model: &Model, series: &Series) -> Result<f64> {
    match forward(model, series) {
        Ok(lat) => Ok(lat.log_likelihood),
        Err(Error::ImpossibleSeries { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}
