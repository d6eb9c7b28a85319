//! One-shot training: initialization from a single exemplar, then
//! duration-explicit EM with soft (posterior) or hard (best path) assignment.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::basis::BasisConfig;
use crate::duration::{
    reestimate_discrete, reestimate_gamma_monotone, DiscreteDuration, DurationFamily,
    DurationModel, DurationStats, GammaDuration, GammaUpdate,
};
use crate::error::{Error, Result};
use crate::lattice::{log_likelihood, Inference};
use crate::model::{EmissionParams, Model, Series};
use crate::regression::weighted_least_squares;

/// Laplace pseudo-count added to every duration in the bounds window in
/// viterbi mode.
pub const VITERBI_SMOOTHING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Every update weighted by segment posteriors.
    Soft,
    /// Updates from the single best segmentation.
    Viterbi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n_states: usize,
    /// Basis order per state; state i gets `orders[i] + 1` weights.
    pub orders: Vec<usize>,
    pub family: DurationFamily,
    /// Per-state `[d_min, d_max]`; `None` searches `[1, T]`.
    pub bounds: Option<Vec<(usize, usize)>>,
    pub mode: TrainMode,
    pub max_iters: usize,
    pub loglik_tol: f64,
    /// Unused: training draws no random numbers.
    pub seed: u64,
    pub basis: BasisConfig,
    pub gamma_update: GammaUpdate,
}

impl TrainConfig {
    /// Soft mode, no bounds, 4 iterations for discrete and 10 for Gamma, tolerance 1e-6.
    pub fn new(orders: Vec<usize>, family: DurationFamily) -> Self {
        let max_order = orders.iter().copied().max().unwrap_or(0);
        Self {
            n_states: orders.len(),
            orders,
            family,
            bounds: None,
            mode: TrainMode::Soft,
            max_iters: default_iters(family),
            loglik_tol: 1e-6,
            seed: 0,
            basis: BasisConfig {
                max_order,
                ..BasisConfig::default()
            },
            gamma_update: GammaUpdate::default(),
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<(usize, usize)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn check(&self, len: usize) -> Result<()> {
        if self.n_states == 0 {
            return Err(Error::domain("need at least one state"));
        }
        if self.orders.len() != self.n_states {
            return Err(Error::domain(format!(
                "{} orders given for {} states",
                self.orders.len(),
                self.n_states
            )));
        }
        if let Some(&o) = self.orders.iter().find(|&&o| o > self.basis.max_order) {
            return Err(Error::domain(format!(
                "order {o} exceeds basis max_order {}",
                self.basis.max_order
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::domain("max_iters must be at least 1"));
        }
        if !(self.loglik_tol >= 0.0) {
            return Err(Error::domain("loglik_tol must be nonnegative"));
        }
        self.basis.validate()?;
        if let Some(b) = &self.bounds {
            if b.len() != self.n_states {
                return Err(Error::domain(format!(
                    "{} bounds given for {} states",
                    b.len(),
                    self.n_states
                )));
            }
            for (i, &(lo, hi)) in b.iter().enumerate() {
                if lo < 1 || hi < lo || hi > len {
                    return Err(Error::domain(format!(
                        "bounds [{lo}, {hi}] of state {} not within [1, {len}]",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn default_iters(family: DurationFamily) -> usize {
    match family {
        DurationFamily::Discrete => 4,
        DurationFamily::Gamma => 10,
    }
}

/// `logliks[k]` is the log-likelihood after k EM steps (k = 0 is the
/// initial model); `millis[k]` is the wall time spent producing that model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    pub logliks: Vec<f64>,
    pub millis: Vec<f64>,
    pub converged: bool,
}

impl FitTrace {
    pub fn iterations(&self) -> usize {
        self.logliks.len().saturating_sub(1)
    }

    /// Largest decrease between consecutive iterations (0 if none).
    pub fn worst_drop(&self) -> f64 {
        self.logliks
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

/// Initial segment lengths: bound midpoints, or an equal split, with the
/// remainder on the last segment.
fn initial_lengths(len: usize, cfg: &TrainConfig) -> Vec<usize> {
    let n = cfg.n_states;
    let mut lengths: Vec<usize> = match &cfg.bounds {
        Some(b) => b.iter().map(|&(lo, hi)| (lo + hi).div_ceil(2)).collect(),
        None => vec![len / n; n],
    };
    let head: usize = lengths[..n - 1].iter().sum();
    if head + 1 > len {
        let scale = (len - 1) as f64 / head as f64;
        for l in &mut lengths[..n - 1] {
            *l = ((*l as f64 * scale).floor() as usize).max(1);
        }
        // the floor of 1 per segment can still overshoot; trim from the longest
        while lengths[..n - 1].iter().sum::<usize>() > len - 1 {
            let k = (0..n - 1)
                .max_by_key(|&k| (lengths[k], std::cmp::Reverse(k)))
                .unwrap();
            lengths[k] -= 1;
        }
    }
    let head: usize = lengths[..n - 1].iter().sum();
    lengths[n - 1] = len - head;
    lengths
}

fn gamma_moment_match(lo: f64, hi: f64, horizon: usize) -> Result<GammaDuration> {
    let m = 0.5 * (lo + hi);
    let sd = ((hi - lo) / 4.0).max(1.0);
    let shape = (m / sd).powi(2);
    GammaDuration::new(shape, shape / m, horizon)
}

fn initial_duration(
    cfg: &TrainConfig,
    state: usize,
    seg_len: usize,
    len: usize,
) -> Result<DurationModel> {
    let bounds = cfg.bounds.as_ref().map(|b| b[state]);
    Ok(match (cfg.family, bounds) {
        (DurationFamily::Discrete, Some((lo, hi))) => {
            DurationModel::Discrete(DiscreteDuration::uniform(lo, hi)?)
        }
        (DurationFamily::Discrete, None) if cfg.n_states == 1 => {
            DurationModel::Discrete(DiscreteDuration::point(len)?)
        }
        (DurationFamily::Discrete, None) => {
            let lo = ((0.75 * seg_len as f64).floor() as usize).max(1);
            let hi = ((1.25 * seg_len as f64).ceil() as usize).min(len).max(lo);
            let mut pmf = vec![0.0; len];
            for p in &mut pmf[lo - 1..hi] {
                *p = 1.0 / (hi - lo + 1) as f64;
            }
            DurationModel::Discrete(DiscreteDuration::new(1, len, pmf)?)
        }
        (DurationFamily::Gamma, Some((lo, hi))) => {
            DurationModel::Gamma(gamma_moment_match(lo as f64, hi as f64, len)?)
        }
        (DurationFamily::Gamma, None) => {
            let l = seg_len as f64;
            DurationModel::Gamma(gamma_moment_match(0.75 * l, 1.25 * l, len)?)
        }
    })
}

/// Left-to-right model fit to an even (or bound-midpoint) split of the series.
pub fn initialize(series: &Series, cfg: &TrainConfig) -> Result<Model> {
    let len = series.len();
    if len < cfg.n_states {
        return Err(Error::Infeasible(format!(
            "{len} samples cannot hold {} segments",
            cfg.n_states
        )));
    }
    cfg.check(len)?;
    let lengths = initial_lengths(len, cfg);
    let mut durations = Vec::with_capacity(cfg.n_states);
    let mut emissions = Vec::with_capacity(cfg.n_states);
    let mut start = 0;
    for (i, &l) in lengths.iter().enumerate() {
        let seg = &series.values[start..start + l];
        let fit = weighted_least_squares(&[(seg, 1.0)], &cfg.basis, cfg.orders[i])
            .map_err(|e| Error::estimation(i, e.to_string()))?;
        emissions.push(EmissionParams::new(fit.weights, fit.precision)?);
        durations.push(initial_duration(cfg, i, l, len)?);
        start += l;
    }
    Model::left_to_right(durations, emissions, cfg.basis, series.sampling_period)
}

/// Reestimated transition rows: masked counts renormalized; rows without
/// mass keep their previous values.
fn reestimate_transitions(model: &Model, counts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = model.n_states;
    let mut trans = model.trans.clone();
    for i in 0..n {
        let allowed = |j: usize| j != i && model.topology_mask[i][j];
        let total: f64 = (0..n).filter(|&j| allowed(j)).map(|j| counts[i][j]).sum();
        if total > 0.0 && total.is_finite() {
            for j in 0..n {
                trans[i][j] = if allowed(j) {
                    counts[i][j] / total
                } else {
                    0.0
                };
            }
        }
    }
    trans
}

fn reestimate_initial(model: &Model, counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total > 0.0 && total.is_finite() {
        counts.iter().map(|c| c / total).collect()
    } else {
        model.pi.clone()
    }
}

/// One EM iteration; returns the new model and the log-likelihood of the
/// model passed in.
pub fn em_step(model: &Model, series: &Series, cfg: &TrainConfig) -> Result<(Model, f64)> {
    match cfg.mode {
        TrainMode::Soft => soft_step(model, series, cfg),
        TrainMode::Viterbi => viterbi_step(model, series, cfg),
    }
}

fn soft_step(model: &Model, series: &Series, cfg: &TrainConfig) -> Result<(Model, f64)> {
    let n = model.n_states;
    let inf = Inference::new(model, series)?;
    let lat = inf.forward_backward()?;
    let post = inf.posteriors(&lat)?;

    let pi = reestimate_initial(model, &post.init);
    let trans = reestimate_transitions(model, &post.trans);

    let mut spans: Vec<Vec<(&[f64], f64)>> = vec![Vec::new(); n];
    for s in &post.spans {
        spans[s.state].push((&series.values[s.start()..s.end], s.weight));
    }
    let mut durations = Vec::with_capacity(n);
    let mut emissions = Vec::with_capacity(n);
    for j in 0..n {
        let stats = &post.dur[j];
        if !(stats.total_mass > 0.0) {
            return Err(Error::estimation(j, "state receives no posterior mass"));
        }
        durations.push(
            reestimate_duration(&model.durations[j], stats, cfg.gamma_update)
                .map_err(|e| Error::estimation(j, e.to_string()))?,
        );
        let fit = weighted_least_squares(&spans[j], &model.basis, model.emissions[j].order())
            .map_err(|e| Error::estimation(j, e.to_string()))?;
        emissions.push(EmissionParams::new(fit.weights, fit.precision)?);
    }
    let next = Model {
        pi,
        trans,
        durations,
        emissions,
        ..model.clone()
    };
    Ok((next, lat.log_likelihood))
}

fn reestimate_duration(
    old: &DurationModel,
    stats: &DurationStats,
    update: GammaUpdate,
) -> Result<DurationModel> {
    Ok(match old {
        DurationModel::Discrete(dd) => {
            DurationModel::Discrete(reestimate_discrete(stats, dd.d_min, dd.d_max)?)
        }
        DurationModel::Gamma(g) => {
            DurationModel::Gamma(reestimate_gamma_monotone(stats, g, update)?)
        }
    })
}

fn viterbi_step(model: &Model, series: &Series, cfg: &TrainConfig) -> Result<(Model, f64)> {
    let n = model.n_states;
    let inf = Inference::new(model, series)?;
    let ll = inf.forward()?.log_likelihood;
    let path = inf.viterbi()?;

    let mut init = vec![0.0; n];
    init[path.segments[0].state] = 1.0;
    let pi = reestimate_initial(model, &init);
    let mut counts = vec![vec![0.0; n]; n];
    for w in path.segments.windows(2) {
        counts[w[0].state][w[1].state] += 1.0;
    }
    let trans = reestimate_transitions(model, &counts);

    let mut durations = model.durations.clone();
    let mut emissions = model.emissions.clone();
    for j in 0..n {
        let segs: Vec<_> = path.segments.iter().filter(|s| s.state == j).collect();
        if segs.is_empty() {
            continue;
        }
        let mut stats = DurationStats::default();
        for s in &segs {
            stats.add(s.duration, 1.0);
        }
        durations[j] = match &model.durations[j] {
            DurationModel::Discrete(dd) => {
                let mut smoothed: BTreeMap<usize, f64> = (dd.d_min..=dd.d_max)
                    .map(|d| (d, VITERBI_SMOOTHING))
                    .collect();
                for (&d, &c) in &stats.counts {
                    *smoothed.entry(d).or_insert(0.0) += c;
                }
                let stats = DurationStats::from_counts(smoothed);
                DurationModel::Discrete(
                    reestimate_discrete(&stats, dd.d_min, dd.d_max)
                        .map_err(|e| Error::estimation(j, e.to_string()))?,
                )
            }
            DurationModel::Gamma(g) => DurationModel::Gamma(
                reestimate_gamma_monotone(&stats, g, cfg.gamma_update)
                    .map_err(|e| Error::estimation(j, e.to_string()))?,
            ),
        };
        let spans: Vec<(&[f64], f64)> = segs
            .iter()
            .map(|s| (&series.values[s.start..s.start + s.duration], 1.0))
            .collect();
        let fit = weighted_least_squares(&spans, &model.basis, model.emissions[j].order())
            .map_err(|e| Error::estimation(j, e.to_string()))?;
        emissions[j] = EmissionParams::new(fit.weights, fit.precision)?;
    }
    let next = Model {
        pi,
        trans,
        durations,
        emissions,
        ..model.clone()
    };
    Ok((next, ll))
}

/// Initializes, then iterates [`em_step`] until the log-likelihood changes
/// by less than `loglik_tol` or `max_iters` steps have run.
pub fn fit(series: &Series, cfg: &TrainConfig) -> Result<(Model, FitTrace)> {
    cfg.check(series.len())?;
    let clock = Instant::now();
    let mut model = initialize(series, cfg)?;
    let mut trace = FitTrace {
        millis: vec![clock.elapsed().as_secs_f64() * 1e3],
        ..FitTrace::default()
    };
    for k in 0..cfg.max_iters {
        let clock = Instant::now();
        let (next, ll) = em_step(&model, series, cfg)?;
        trace.millis.push(clock.elapsed().as_secs_f64() * 1e3);
        log::info!("iteration {k}: loglik {ll}");
        trace.logliks.push(ll);
        model = next;
        if k > 0 && (trace.logliks[k] - trace.logliks[k - 1]).abs() < cfg.loglik_tol {
            trace.converged = true;
            break;
        }
    }
    trace.logliks.push(log_likelihood(&model, series)?);
    Ok((model, trace))
}
