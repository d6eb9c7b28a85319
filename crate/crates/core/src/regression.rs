//! Weighted least squares over segment design matrices.

use std::collections::BTreeMap;

use crate::basis::BasisConfig;
use crate::error::{Error, Result};

pub const PRECISION_MIN: f64 = 1e-8;
pub const PRECISION_MAX: f64 = 1e12;

/// Pivot threshold, relative to the largest diagonal entry, below which the
/// normal matrix is treated as singular.
const SINGULAR_PIVOT: f64 = 1e-12;
const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub weights: Vec<f64>,
    pub precision: f64,
    /// Whether the ridge fallback was needed.
    pub ridged: bool,
}

/// In-place Cholesky factorization of a row-major `m × m` SPD matrix.
/// Returns false if a pivot falls below `tol`.
fn cholesky(a: &mut [f64], m: usize, tol: f64) -> bool {
    for j in 0..m {
        let mut diag = a[j * m + j];
        for k in 0..j {
            diag -= a[j * m + k] * a[j * m + k];
        }
        if !(diag > tol) {
            return false;
        }
        let l = diag.sqrt();
        a[j * m + j] = l;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / l;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], m: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..m {
        for k in 0..i {
            y[i] -= l[i * m + k] * y[k];
        }
        y[i] /= l[i * m + i];
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            y[i] -= l[k * m + i] * y[k];
        }
        y[i] /= l[i * m + i];
    }
    y
}

/// Solves `gram · w = rhs`, adding `1e-8·trace/m` to the diagonal if the
/// matrix is singular to working precision.
pub fn solve_normal_equations(gram: &[f64], rhs: &[f64]) -> Result<(Vec<f64>, bool)> {
    let m = rhs.len();
    let max_diag = (0..m).map(|i| gram[i * m + i]).fold(0.0, f64::max);
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return Err(Error::domain("normal equations have no information"));
    }
    let mut l = gram.to_vec();
    if cholesky(&mut l, m, SINGULAR_PIVOT * max_diag) {
        return Ok((cholesky_solve(&l, m, rhs), false));
    }
    let trace: f64 = (0..m).map(|i| gram[i * m + i]).sum();
    let ridge = RIDGE * trace / m as f64;
    let mut l = gram.to_vec();
    for i in 0..m {
        l[i * m + i] += ridge;
    }
    if cholesky(&mut l, m, 0.0) {
        Ok((cholesky_solve(&l, m, rhs), true))
    } else {
        Err(Error::domain(
            "normal equations are rank deficient beyond ridge rescue",
        ))
    }
}

/// Minimizes Σ_spans ω‖v_span − Φ_d w‖² where each span carries its own
/// `d × (order+1)` design matrix; precision⁻¹ = Σ ω‖r‖² / Σ ω d.
pub fn weighted_least_squares(
    spans: &[(&[f64], f64)],
    basis: &BasisConfig,
    order: usize,
) -> Result<RegressionFit> {
    let m = order + 1;
    // d → (Σ ω, Σ ω v_span)
    let mut by_len: BTreeMap<usize, (f64, Vec<f64>)> = BTreeMap::new();
    let mut total = 0.0;
    for &(samples, w) in spans {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::domain(format!(
                "span weight {w} is not a nonnegative finite number"
            )));
        }
        let d = samples.len();
        if d == 0 || w == 0.0 {
            continue;
        }
        let (ws, acc) = by_len.entry(d).or_insert_with(|| (0.0, vec![0.0; d]));
        *ws += w;
        for (a, v) in acc.iter_mut().zip(samples) {
            *a += w * v;
        }
        total += w * d as f64;
    }
    if !(total > 0.0) {
        return Err(Error::domain("no weighted samples to regress on"));
    }

    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    let mut designs = BTreeMap::new();
    for (&d, (ws, acc)) in &by_len {
        let phi = basis.design_matrix(order, d);
        for (row, &u) in phi.chunks_exact(m).zip(acc) {
            for a in 0..m {
                rhs[a] += row[a] * u;
                for b in 0..m {
                    gram[a * m + b] += ws * row[a] * row[b];
                }
            }
        }
        designs.insert(d, phi);
    }
    let (weights, ridged) = solve_normal_equations(&gram, &rhs)?;

    let fitted: BTreeMap<usize, Vec<f64>> = designs
        .iter()
        .map(|(&d, phi)| {
            let y = phi
                .chunks_exact(m)
                .map(|row| row.iter().zip(&weights).map(|(p, w)| p * w).sum())
                .collect();
            (d, y)
        })
        .collect();
    let mut rss = 0.0;
    for &(samples, w) in spans {
        if w == 0.0 || samples.is_empty() {
            continue;
        }
        let y = &fitted[&samples.len()];
        let ss: f64 = samples.iter().zip(y).map(|(v, f)| (v - f) * (v - f)).sum();
        rss += w * ss;
    }
    let precision = if rss > 0.0 {
        (total / rss).clamp(PRECISION_MIN, PRECISION_MAX)
    } else {
        PRECISION_MAX
    };
    Ok(RegressionFit {
        weights,
        precision,
        ridged,
    })
}
