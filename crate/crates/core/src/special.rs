//! Special functions used by the Gamma duration model.
//!
//! Digamma and trigamma use upward recurrence to `x >= 10` followed by the
//! Bernoulli asymptotic series. The regularized incomplete gamma functions
//! use the power series below `x < s + 1` and a modified-Lentz continued
//! fraction above it.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// ψ(1) = −γ (Euler–Mascheroni).
pub const DIGAMMA_ONE: f64 = -0.577_215_664_901_532_9;

const ASYMPTOTIC_SHIFT: f64 = 10.0;
const MAX_SERIES_TERMS: usize = 100_000;
const NEWTON_MAX_ITERS: usize = 50;

/// Digamma ψ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!(
            "digamma requires finite x > 0, got {x}"
        )));
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < ASYMPTOTIC_SHIFT {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ln x − 1/(2x) − Σ B_{2k} / (2k x^{2k})
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(shift + x.ln() - 0.5 * inv - tail)
}

/// Trigamma ψ′(x) for x > 0.
pub fn trigamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!(
            "trigamma requires finite x > 0, got {x}"
        )));
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < ASYMPTOTIC_SHIFT {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x²) + Σ B_{2k} / x^{2k+1}
    let series = inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                - inv2
                    * (1.0 / 30.0
                        - inv2
                            * (1.0 / 42.0
                                - inv2
                                    * (1.0 / 30.0
                                        - inv2
                                            * (5.0 / 66.0
                                                - inv2 * (691.0 / 2730.0 - inv2 * 7.0 / 6.0))))));
    Ok(shift + series)
}

/// Solves ψ(ν) = x for ν > 0 by Newton–Raphson.
///
/// Initial guess `e^x + 1/2` when `x >= -2.22`, else `-1/(x + ψ(1))`.
pub fn invert_digamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!(
            "invert_digamma requires finite x, got {x}"
        )));
    }
    let mut y = if x >= -2.22 {
        x.exp() + 0.5
    } else {
        -1.0 / (x + DIGAMMA_ONE)
    };
    for _ in 0..NEWTON_MAX_ITERS {
        let f = digamma(y)? - x;
        if f == 0.0 {
            return Ok(y);
        }
        let mut next = y - f / trigamma(y)?;
        // ψ is concave, so an overshoot from the right can land at ν <= 0;
        // the root then lies in (0, y).
        if next <= 0.0 {
            next = 0.5 * y;
        }
        let step = (next - y).abs();
        y = next;
        if step <= 4.0 * f64::EPSILON * y {
            return Ok(y);
        }
    }
    let residual = digamma(y)? - x;
    if residual.abs() <= 1e-10 {
        Ok(y)
    } else {
        Err(Error::Numeric {
            msg: format!("invert_digamma({x}) did not converge in {NEWTON_MAX_ITERS} iterations"),
            last: y,
        })
    }
}

fn check_incomplete_args(s: f64, x: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(format!(
            "incomplete gamma requires s > 0, got {s}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!(
            "incomplete gamma requires x >= 0, got {x}"
        )));
    }
    Ok(())
}

/// `ln(x^s e^{-x} / Γ(s))`
fn log_prefactor(s: f64, x: f64) -> f64 {
    s * x.ln() - x - ln_gamma(s)
}

/// Power series for P(s, x), valid (and fast) for x < s + 1.
fn lower_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut denom = s;
    for _ in 0..MAX_SERIES_TERMS {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (sum.ln() + log_prefactor(s, x)).exp()
}

/// Continued fraction for Q(s, x), valid for x >= s + 1.
fn upper_continued_fraction(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_SERIES_TERMS {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (h.ln() + log_prefactor(s, x)).exp()
}

/// Regularized lower incomplete gamma P(s, x) = γ(s, x) / Γ(s).
pub fn reg_lower_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    check_incomplete_args(s, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    if x < s + 1.0 {
        Ok(lower_series(s, x).min(1.0))
    } else {
        Ok((1.0 - upper_continued_fraction(s, x)).max(0.0))
    }
}

/// Regularized upper incomplete gamma Q(s, x) = 1 − P(s, x).
pub fn reg_upper_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    check_incomplete_args(s, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        Ok((1.0 - lower_series(s, x)).max(0.0))
    } else {
        Ok(upper_continued_fraction(s, x).min(1.0))
    }
}

/// Gamma(shape, 1) probability mass on `[a, b]`, differencing whichever
/// tail keeps the subtraction well conditioned.
pub fn gamma_interval_mass(shape: f64, a: f64, b: f64) -> Result<f64> {
    if !(b >= a) {
        return Err(Error::domain(format!("interval [{a}, {b}] is empty")));
    }
    if a >= shape + 1.0 {
        Ok(
            (reg_upper_incomplete_gamma(shape, a)? - reg_upper_incomplete_gamma(shape, b)?)
                .max(0.0),
        )
    } else {
        Ok(
            (reg_lower_incomplete_gamma(shape, b)? - reg_lower_incomplete_gamma(shape, a)?)
                .max(0.0),
        )
    }
}

/// Log density of Gamma(shape, rate) at x > 0.
pub fn gamma_log_pdf(shape: f64, rate: f64, x: f64) -> f64 {
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
}
