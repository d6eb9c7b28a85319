//! Regression basis functions evaluated on segment-local time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisFamily {
    /// Orthonormal Hermite functions ψ_j with ψ_0 replaced by the constant 1.
    HermiteOrthonormal,
    /// Powers x^j.
    Monomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeConvention {
    /// Sample k of a d-sample segment maps to u = −1 + 2k/(d−1) (u = 0 when d = 1).
    SegmentNormalized,
    /// Sample k maps to u = k.
    SegmentOffset,
}

/// Basis shared by every state. Per-state orders live on the emissions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub family: BasisFamily,
    /// Largest order any state may use.
    pub max_order: usize,
    /// Half-width c of the basis argument: x = c·u.
    pub scale: f64,
    pub time_convention: TimeConvention,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            family: BasisFamily::HermiteOrthonormal,
            max_order: 6,
            scale: 3.0,
            time_convention: TimeConvention::SegmentNormalized,
        }
    }
}

impl BasisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::domain(format!(
                "basis scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    /// Basis argument x for sample `offset` of a `duration`-sample segment.
    pub fn argument(&self, offset: usize, duration: usize) -> f64 {
        let u = match self.time_convention {
            TimeConvention::SegmentNormalized if duration == 1 => 0.0,
            TimeConvention::SegmentNormalized => -1.0 + 2.0 * offset as f64 / (duration - 1) as f64,
            TimeConvention::SegmentOffset => offset as f64,
        };
        self.scale * u
    }

    /// Fills `out[0..=order]` with φ_0..φ_order at x.
    pub fn eval_at(&self, x: f64, out: &mut [f64]) {
        match self.family {
            BasisFamily::Monomial => {
                let mut p = 1.0;
                for v in out.iter_mut() {
                    *v = p;
                    p *= x;
                }
            }
            BasisFamily::HermiteOrthonormal => hermite_functions(x, out),
        }
        out[0] = 1.0;
    }

    /// Design matrix for a `duration`-sample segment, row-major `duration × (order+1)`.
    pub fn design_matrix(&self, order: usize, duration: usize) -> Vec<f64> {
        let cols = order + 1;
        let mut rows = vec![0.0; duration * cols];
        for (k, row) in rows.chunks_exact_mut(cols).enumerate() {
            self.eval_at(self.argument(k, duration), row);
        }
        rows
    }
}

/// Orthonormal Hermite functions ψ_0..ψ_{n-1} at x via the stable three-term recurrence
/// ψ_{j+1} = √(2/(j+1)) x ψ_j − √(j/(j+1)) ψ_{j−1}.
pub fn hermite_functions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let psi0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    out[0] = psi0;
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * psi0;
    }
    for j in 1..out.len().saturating_sub(1) {
        let jf = j as f64;
        out[j + 1] = (2.0 / (jf + 1.0)).sqrt() * x * out[j] - (jf / (jf + 1.0)).sqrt() * out[j - 1];
    }
}

/// φ_0..φ_order for sample `offset` of a `duration`-sample segment.
pub fn basis_eval(
    basis: &BasisConfig,
    order: usize,
    offset: usize,
    duration: usize,
) -> Result<Vec<f64>> {
    if duration < 1 {
        return Err(Error::domain("segment duration must be at least 1"));
    }
    if offset >= duration {
        return Err(Error::domain(format!(
            "offset {offset} outside segment of duration {duration}"
        )));
    }
    let mut out = vec![0.0; order + 1];
    basis.eval_at(basis.argument(offset, duration), &mut out);
    Ok(out)
}
