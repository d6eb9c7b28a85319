//! State-duration densities: a bounded discrete pmf, or a Gamma density
//! discretized onto integer durations `1..=horizon`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::logsumexp;
use crate::special::{gamma_interval_mass, gamma_log_pdf, invert_digamma};

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDuration {
    pub d_min: usize,
    pub d_max: usize,
    /// `pmf[k]` is the probability of duration `d_min + k`.
    pub pmf: Vec<f64>,
}

impl DiscreteDuration {
    pub fn new(d_min: usize, d_max: usize, pmf: Vec<f64>) -> Result<Self> {
        let dd = Self { d_min, d_max, pmf };
        dd.check().map_err(Error::Domain)?;
        Ok(dd)
    }

    pub fn uniform(d_min: usize, d_max: usize) -> Result<Self> {
        if d_min == 0 || d_max < d_min {
            return Err(Error::domain(format!(
                "invalid duration bounds [{d_min}, {d_max}]"
            )));
        }
        let n = d_max - d_min + 1;
        Self::new(d_min, d_max, vec![1.0 / n as f64; n])
    }

    pub fn point(d: usize) -> Result<Self> {
        Self::new(d, d, vec![1.0])
    }

    pub fn pmf(&self, d: usize) -> f64 {
        if d < self.d_min || d > self.d_max {
            0.0
        } else {
            self.pmf[d - self.d_min]
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.d_min < 1 {
            return Err("d_min must be at least 1".into());
        }
        if self.d_max < self.d_min {
            return Err(format!("d_max {} below d_min {}", self.d_max, self.d_min));
        }
        if self.pmf.len() != self.d_max - self.d_min + 1 {
            return Err(format!(
                "pmf has {} entries for support [{}, {}]",
                self.pmf.len(),
                self.d_min,
                self.d_max
            ));
        }
        if self.pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err("pmf has negative or non-finite entries".into());
        }
        let sum: f64 = self.pmf.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(format!("pmf sums to {sum}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaDuration {
    /// Shape ν.
    pub shape: f64,
    /// Rate η (per sample).
    pub rate: f64,
    /// Durations are supported on `1..=horizon` and renormalized there.
    pub horizon: usize,
}

impl GammaDuration {
    pub fn new(shape: f64, rate: f64, horizon: usize) -> Result<Self> {
        let g = Self {
            shape,
            rate,
            horizon,
        };
        g.check().map_err(Error::Domain)?;
        Ok(g)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(format!("gamma shape must be positive, got {}", self.shape));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(format!("gamma rate must be positive, got {}", self.rate));
        }
        if self.horizon < 1 {
            return Err("gamma horizon must be at least 1".into());
        }
        Ok(())
    }

    /// Unnormalized log mass of `[d, d+1)`: ln[P(ν, η(d+1)) − P(ν, ηd)].
    ///
    /// Falls back to the density at the cell midpoint once the incomplete-gamma
    /// difference underflows.
    pub fn log_cell_mass(&self, d: usize) -> f64 {
        let a = self.rate * d as f64;
        let b = self.rate * (d + 1) as f64;
        match gamma_interval_mass(self.shape, a, b) {
            Ok(m) if m > 1e-280 => m.ln(),
            _ => gamma_log_pdf(self.shape, self.rate, d as f64 + 0.5),
        }
    }

    /// Normalized log pmf over `1..=horizon` (index `d − 1`).
    pub fn log_pmf_table(&self) -> Vec<f64> {
        let mut cells: Vec<f64> = (1..=self.horizon).map(|d| self.log_cell_mass(d)).collect();
        let log_z = logsumexp(&cells);
        for c in &mut cells {
            *c -= log_z;
        }
        cells
    }

    /// Continuous mean ν/η.
    pub fn continuous_mean(&self) -> f64 {
        self.shape / self.rate
    }
}

/// Discretized Gamma pmf with explicit renormalization over `1..=horizon`;
/// zero outside the support.
pub fn gamma_pmf(gd: &GammaDuration, d: usize) -> f64 {
    if d < 1 || d > gd.horizon {
        return 0.0;
    }
    gd.log_pmf_table()[d - 1].exp()
}

/// Which parametric form a duration model takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DurationFamily {
    Discrete,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DurationModel {
    Discrete(DiscreteDuration),
    Gamma(GammaDuration),
}

impl DurationModel {
    /// Inclusive duration range the model can assign mass to.
    pub fn support(&self) -> (usize, usize) {
        match self {
            DurationModel::Discrete(dd) => (dd.d_min, dd.d_max),
            DurationModel::Gamma(g) => (1, g.horizon),
        }
    }

    /// Log pmf over `support()`, index `d − support().0`.
    pub fn log_pmf_table(&self) -> Vec<f64> {
        match self {
            DurationModel::Discrete(dd) => dd.pmf.iter().map(|p| p.ln()).collect(),
            DurationModel::Gamma(g) => g.log_pmf_table(),
        }
    }

    pub fn pmf(&self, d: usize) -> f64 {
        match self {
            DurationModel::Discrete(dd) => dd.pmf(d),
            DurationModel::Gamma(g) => gamma_pmf(g, d),
        }
    }

    /// `-inf` off the support.
    pub fn log_pmf(&self, d: usize) -> f64 {
        self.pmf(d).ln()
    }

    /// Mean of the pmf actually used for inference.
    pub fn mean(&self) -> f64 {
        let (lo, _) = self.support();
        self.log_pmf_table()
            .iter()
            .enumerate()
            .map(|(k, lp)| (lo + k) as f64 * lp.exp())
            .sum()
    }

    pub fn family(&self) -> DurationFamily {
        match self {
            DurationModel::Discrete(_) => DurationFamily::Discrete,
            DurationModel::Gamma(_) => DurationFamily::Gamma,
        }
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        match self {
            DurationModel::Discrete(dd) => dd.check(),
            DurationModel::Gamma(g) => g.check(),
        }
    }
}

/// Posterior duration statistics for one state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DurationStats {
    /// Expected number of occurrences of the state.
    pub total_mass: f64,
    /// Σ_d d·counts(d).
    pub expected_d: f64,
    /// Σ_d ln(d)·counts(d); the ln η term of the shape update is added separately.
    pub expected_log_d: f64,
    /// Expected number of occurrences with duration exactly d.
    pub counts: BTreeMap<usize, f64>,
}

impl DurationStats {
    pub fn from_counts(counts: BTreeMap<usize, f64>) -> Self {
        let mut stats = DurationStats {
            counts,
            ..Default::default()
        };
        for (&d, &c) in &stats.counts {
            stats.total_mass += c;
            stats.expected_d += d as f64 * c;
            stats.expected_log_d += (d as f64).ln() * c;
        }
        stats
    }

    pub fn add(&mut self, d: usize, weight: f64) {
        if weight == 0.0 {
            return;
        }
        *self.counts.entry(d).or_insert(0.0) += weight;
        self.total_mass += weight;
        self.expected_d += d as f64 * weight;
        self.expected_log_d += (d as f64).ln() * weight;
    }
}

/// p̄(d) = counts(d) / Σ counts, restricted to `[d_min, d_max]`.
pub fn reestimate_discrete(
    stats: &DurationStats,
    d_min: usize,
    d_max: usize,
) -> Result<DiscreteDuration> {
    if d_min < 1 || d_max < d_min {
        return Err(Error::domain(format!(
            "invalid duration bounds [{d_min}, {d_max}]"
        )));
    }
    let mut pmf = vec![0.0; d_max - d_min + 1];
    for (&d, &c) in stats.counts.range(d_min..=d_max) {
        pmf[d - d_min] = c;
    }
    let total: f64 = pmf.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::domain(
            "duration counts have no mass inside the bounds",
        ));
    }
    for p in &mut pmf {
        *p /= total;
    }
    Ok(DiscreteDuration { d_min, d_max, pmf })
}

/// How the Gamma shape update treats the rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaUpdate {
    /// η̄ from the old ν and ν̄ from the old η.
    #[default]
    Independent,
    /// η̄ from the old ν, then ν̄ from η̄.
    Coupled,
}

/// One stationarity update of (ν, η) from posterior duration statistics.
///
/// η̄ = ν·mass / E[d] and ψ(ν̄) = (E[ln d] + ln η·mass) / mass.
pub fn reestimate_gamma(stats: &DurationStats, old: &GammaDuration) -> Result<GammaDuration> {
    reestimate_gamma_with(stats, old, GammaUpdate::Independent)
}

pub fn reestimate_gamma_with(
    stats: &DurationStats,
    old: &GammaDuration,
    update: GammaUpdate,
) -> Result<GammaDuration> {
    if !(stats.total_mass > 0.0) {
        return Err(Error::domain(
            "gamma reestimation needs positive posterior mass",
        ));
    }
    if !(stats.expected_d > 0.0) {
        return Err(Error::domain(
            "gamma reestimation needs positive expected duration",
        ));
    }
    let rate = old.shape * stats.total_mass / stats.expected_d;
    let log_rate = match update {
        GammaUpdate::Independent => old.rate.ln(),
        GammaUpdate::Coupled => rate.ln(),
    };
    let target = (stats.expected_log_d + log_rate * stats.total_mass) / stats.total_mass;
    let shape = invert_digamma(target)?;
    GammaDuration::new(shape, rate, old.horizon)
}

/// Expected complete-data log-likelihood Σ_d counts(d) ln p(d) of the duration term.
pub fn duration_objective(stats: &DurationStats, model: &DurationModel) -> f64 {
    let (lo, hi) = model.support();
    let table = model.log_pmf_table();
    stats
        .counts
        .iter()
        .filter(|(_, &c)| c > 0.0)
        .map(|(&d, &c)| {
            if d < lo || d > hi {
                f64::NEG_INFINITY
            } else {
                c * table[d - lo]
            }
        })
        .sum()
}

/// Gamma update that never lowers the duration objective.
///
/// The stationarity update is taken when it does not decrease
/// Σ counts·ln p over the discretized pmf; otherwise the step is halved in
/// (ln ν, ln η) until it does, falling back to `old`.
pub fn reestimate_gamma_monotone(
    stats: &DurationStats,
    old: &GammaDuration,
    update: GammaUpdate,
) -> Result<GammaDuration> {
    let proposal = reestimate_gamma_with(stats, old, update)?;
    let q_old = duration_objective(stats, &DurationModel::Gamma(*old));
    let objective = |g: &GammaDuration| duration_objective(stats, &DurationModel::Gamma(*g));
    if objective(&proposal) >= q_old {
        return Ok(proposal);
    }
    let (ls0, lr0) = (old.shape.ln(), old.rate.ln());
    let (dls, dlr) = (proposal.shape.ln() - ls0, proposal.rate.ln() - lr0);
    let mut step = 0.5;
    for _ in 0..40 {
        let cand = GammaDuration::new(
            (ls0 + step * dls).exp(),
            (lr0 + step * dlr).exp(),
            old.horizon,
        )?;
        if objective(&cand) >= q_old {
            log::debug!("gamma update damped to step {step}");
            return Ok(cand);
        }
        step *= 0.5;
    }
    Ok(*old)
}
