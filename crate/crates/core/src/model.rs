//! The PLHMM parameter bundle and its Gaussian regression emissions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::basis::BasisConfig;
use crate::duration::DurationModel;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const STOCHASTIC_TOL: f64 = 1e-12;

/// Gaussian noise around the regression curve w·φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionParams {
    pub weights: Vec<f64>,
    /// Inverse noise variance.
    pub precision: f64,
}

impl EmissionParams {
    pub fn new(weights: Vec<f64>, precision: f64) -> Result<Self> {
        let em = Self { weights, precision };
        em.check().map_err(Error::Domain)?;
        Ok(em)
    }

    pub fn order(&self) -> usize {
        self.weights.len().saturating_sub(1)
    }

    pub fn mean(&self, phi: &[f64]) -> f64 {
        self.weights.iter().zip(phi).map(|(w, p)| w * p).sum()
    }

    /// ½ ln(β / 2π), the per-sample normalizer.
    pub fn log_norm(&self) -> f64 {
        0.5 * (self.precision.ln() - LN_2PI)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.weights.is_empty() {
            return Err("emission has no weights".into());
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err("emission weights must be finite".into());
        }
        if !(self.precision > 0.0 && self.precision.is_finite()) {
            return Err(format!(
                "precision must be positive and finite, got {}",
                self.precision
            ));
        }
        Ok(())
    }
}

/// ln N(v | w·φ, 1/β).
pub fn emission_log_density(em: &EmissionParams, phi: &[f64], v: f64) -> Result<f64> {
    if phi.len() != em.weights.len() {
        return Err(Error::domain(format!(
            "basis vector has {} entries, emission order {} needs {}",
            phi.len(),
            em.order(),
            em.weights.len()
        )));
    }
    if !v.is_finite() || phi.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("emission inputs must be finite"));
    }
    let r = v - em.mean(phi);
    Ok(em.log_norm() - 0.5 * em.precision * r * r)
}

/// Σ_k ln N(samples[k] | w·φ(k, d), 1/β) over one `d`-sample segment.
pub fn segment_log_likelihood(
    em: &EmissionParams,
    basis: &BasisConfig,
    samples: &[f64],
    d: usize,
) -> Result<f64> {
    if samples.len() != d || d == 0 {
        return Err(Error::domain(format!(
            "segment of {} samples declared with duration {d}",
            samples.len()
        )));
    }
    let mut phi = vec![0.0; em.weights.len()];
    let mut total = 0.0;
    for (k, &v) in samples.iter().enumerate() {
        basis.eval_at(basis.argument(k, d), &mut phi);
        total += emission_log_density(em, &phi, v)?;
    }
    Ok(total)
}

/// A uniformly sampled univariate series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub values: Vec<f64>,
    /// Seconds per sample.
    pub sampling_period: f64,
}

impl Series {
    pub fn new(values: Vec<f64>, sampling_period: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("series must contain at least one sample"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "series value at index {i} is not finite"
            )));
        }
        if !(sampling_period > 0.0 && sampling_period.is_finite()) {
            return Err(Error::domain(format!(
                "sampling period must be positive, got {sampling_period}"
            )));
        }
        Ok(Self {
            values,
            sampling_period,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Samples `start..start+len` as a new series with the same period.
    pub fn window(&self, start: usize, len: usize) -> Series {
        Series {
            values: self.values[start..start + len].to_vec(),
            sampling_period: self.sampling_period,
        }
    }
}

/// One violated model invariant. State indices display 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Dimension(String),
    InitialEntry { state: usize, value: f64 },
    InitialSum { sum: f64 },
    SelfTransition { state: usize, value: f64 },
    TransitionEntry { from: usize, to: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    Topology { from: usize, to: usize, value: f64 },
    Duration { state: usize, reason: String },
    Emission { state: usize, reason: String },
    Basis(String),
    SamplingPeriod(f64),
}

impl Violation {
    /// Coarse class name, stable across indices and values.
    pub fn class(&self) -> &'static str {
        match self {
            Violation::Dimension(_) => "dimension",
            Violation::InitialEntry { .. } => "initial-entry",
            Violation::InitialSum { .. } => "initial-sum",
            Violation::SelfTransition { .. } => "self-transition",
            Violation::TransitionEntry { .. } => "transition-entry",
            Violation::RowSum { .. } => "row-sum",
            Violation::Topology { .. } => "topology",
            Violation::Duration { .. } => "duration",
            Violation::Emission { .. } => "emission",
            Violation::Basis(_) => "basis",
            Violation::SamplingPeriod(_) => "sampling-period",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension(what) => write!(f, "dimension mismatch: {what}"),
            Violation::InitialEntry { state, value } => {
                write!(f, "initial probability at state {} is {value}", state + 1)
            }
            Violation::InitialSum { sum } => write!(f, "initial distribution sums to {sum}"),
            Violation::SelfTransition { state, value } => {
                write!(
                    f,
                    "self-transition nonzero at state {} ({value})",
                    state + 1
                )
            }
            Violation::TransitionEntry { from, to, value } => {
                write!(f, "transition {}->{} is {value}", from + 1, to + 1)
            }
            Violation::RowSum { row, sum } => {
                write!(
                    f,
                    "transition row {} sums to {sum} (neither stochastic nor absorbing)",
                    row + 1
                )
            }
            Violation::Topology { from, to, value } => {
                write!(
                    f,
                    "transition {}->{} is {value} but not allowed by the topology",
                    from + 1,
                    to + 1
                )
            }
            Violation::Duration { state, reason } => {
                write!(f, "duration model of state {}: {reason}", state + 1)
            }
            Violation::Emission { state, reason } => {
                write!(f, "emission of state {}: {reason}", state + 1)
            }
            Violation::Basis(reason) => write!(f, "basis: {reason}"),
            Violation::SamplingPeriod(p) => write!(f, "sampling period {p} is not positive"),
        }
    }
}

/// Full PLHMM parameter bundle λ = (A, π, durations, emissions).
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub n_states: usize,
    pub pi: Vec<f64>,
    /// Row-major N×N; rows of all zeros are absorbing.
    pub trans: Vec<Vec<f64>>,
    pub topology_mask: Vec<Vec<bool>>,
    pub durations: Vec<DurationModel>,
    pub emissions: Vec<EmissionParams>,
    pub basis: BasisConfig,
    pub sampling_period: f64,
}

impl Model {
    /// Left-to-right chain: π = e₁, a_{i,i+1} = 1, last row absorbing.
    pub fn left_to_right(
        durations: Vec<DurationModel>,
        emissions: Vec<EmissionParams>,
        basis: BasisConfig,
        sampling_period: f64,
    ) -> Result<Self> {
        let n = durations.len();
        if n == 0 || emissions.len() != n {
            return Err(Error::domain(format!(
                "need one duration and one emission per state, got {} and {}",
                n,
                emissions.len()
            )));
        }
        let mut pi = vec![0.0; n];
        pi[0] = 1.0;
        let mut trans = vec![vec![0.0; n]; n];
        let mut mask = vec![vec![false; n]; n];
        for i in 0..n - 1 {
            trans[i][i + 1] = 1.0;
            mask[i][i + 1] = true;
        }
        let model = Model {
            n_states: n,
            pi,
            trans,
            topology_mask: mask,
            durations,
            emissions,
            basis,
            sampling_period,
        };
        model.check()?;
        Ok(model)
    }

    pub fn is_absorbing(&self, state: usize) -> bool {
        self.trans[state].iter().all(|&a| a == 0.0)
    }

    /// Every violated invariant; empty when the model is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.n_states;
        let mut out = Vec::new();
        if n == 0 {
            out.push(Violation::Dimension("model has no states".into()));
            return out;
        }
        let trans_square = self.trans.len() == n && self.trans.iter().all(|r| r.len() == n);
        let mask_square =
            self.topology_mask.len() == n && self.topology_mask.iter().all(|r| r.len() == n);
        if self.pi.len() != n
            || !trans_square
            || !mask_square
            || self.durations.len() != n
            || self.emissions.len() != n
        {
            out.push(Violation::Dimension(format!(
                "n_states = {n} but pi has {}, trans has {} rows, mask has {} rows, {} durations, {} emissions",
                self.pi.len(),
                self.trans.len(),
                self.topology_mask.len(),
                self.durations.len(),
                self.emissions.len()
            )));
            return out;
        }

        for (i, &p) in self.pi.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                out.push(Violation::InitialEntry { state: i, value: p });
            }
        }
        let pi_sum: f64 = self.pi.iter().sum();
        if (pi_sum - 1.0).abs() > STOCHASTIC_TOL {
            out.push(Violation::InitialSum { sum: pi_sum });
        }

        for i in 0..n {
            let row = &self.trans[i];
            if row[i] != 0.0 {
                out.push(Violation::SelfTransition {
                    state: i,
                    value: row[i],
                });
            }
            let mut sum = 0.0;
            let mut any = false;
            for (j, &a) in row.iter().enumerate() {
                if j == i {
                    continue;
                }
                if !(a.is_finite() && a >= 0.0) {
                    out.push(Violation::TransitionEntry {
                        from: i,
                        to: j,
                        value: a,
                    });
                    continue;
                }
                if a != 0.0 {
                    any = true;
                    if !self.topology_mask[i][j] {
                        out.push(Violation::Topology {
                            from: i,
                            to: j,
                            value: a,
                        });
                    }
                }
                sum += a;
            }
            if any && (sum - 1.0).abs() > STOCHASTIC_TOL {
                out.push(Violation::RowSum { row: i, sum });
            }
        }

        for (i, d) in self.durations.iter().enumerate() {
            if let Err(reason) = d.check() {
                out.push(Violation::Duration { state: i, reason });
            }
        }
        for (i, em) in self.emissions.iter().enumerate() {
            if let Err(reason) = em.check() {
                out.push(Violation::Emission { state: i, reason });
            } else if em.order() > self.basis.max_order {
                out.push(Violation::Emission {
                    state: i,
                    reason: format!(
                        "order {} exceeds basis max_order {}",
                        em.order(),
                        self.basis.max_order
                    ),
                });
            }
        }
        if let Err(e) = self.basis.validate() {
            out.push(Violation::Basis(e.to_string()));
        }
        if !(self.sampling_period > 0.0 && self.sampling_period.is_finite()) {
            out.push(Violation::SamplingPeriod(self.sampling_period));
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    /// Per-state emission orders.
    pub fn orders(&self) -> Vec<usize> {
        self.emissions.iter().map(EmissionParams::order).collect()
    }
}
