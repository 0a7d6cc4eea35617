use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ln_factorial, DensityMatrix};
use crate::error::{Error, Result};
use crate::hermite::hermite_functions_into;

/// Largest population allowed in the top Fock level before Wigner evaluation
/// is flagged as truncation-limited.
pub const WIGNER_TAIL_TOL: f64 = 1e-6;

pub fn photon_distribution(rho: &DensityMatrix) -> Vec<f64> {
    (0..rho.dim()).map(|n| rho.get(n, n).re).collect()
}

/// Total population of even photon numbers.
pub fn even_sum(rho: &DensityMatrix) -> f64 {
    (0..rho.dim()).step_by(2).map(|n| rho.get(n, n).re).sum()
}

/// W(0,0) = (1/π) Σ (−1)ⁿ ρₙₙ.
pub fn wigner_origin(rho: &DensityMatrix) -> f64 {
    (2.0 * even_sum(rho) - rho.trace()) / PI
}

/// Wigner function at phase-space point (x, p).
///
/// Uses the Laguerre expansion over Fock matrix elements. Fails with
/// [`Error::SeriesTail`] when the top Fock level holds more than
/// [`WIGNER_TAIL_TOL`], which signals that the cutoff truncates the state.
pub fn wigner(rho: &DensityMatrix, x: f64, p: f64) -> Result<f64> {
    check_tail(rho, WIGNER_TAIL_TOL)?;
    Ok(wigner_series(rho, x, p))
}

fn check_tail(rho: &DensityMatrix, tol: f64) -> Result<()> {
    let tail = rho.top_population();
    if tail > tol {
        return Err(Error::SeriesTail(tail));
    }
    Ok(())
}

pub(crate) fn wigner_series(rho: &DensityMatrix, x: f64, p: f64) -> f64 {
    let d = rho.dim();
    let alpha = Complex64::new(x, p) / 2f64.sqrt();
    let b = 4.0 * alpha.norm_sqr();
    let two_alpha = alpha * 2.0;
    let mut total = 0.0;
    let mut lag = vec![0.0; d];
    // offset k = n − m; L_m^{(k)}(b) by the three-term recurrence in m
    let mut pow = Complex64::new(1.0, 0.0);
    for k in 0..d {
        let len = d - k;
        let kf = k as f64;
        lag[0] = 1.0;
        if len > 1 {
            lag[1] = 1.0 + kf - b;
        }
        for j in 1..len.saturating_sub(1) {
            let jf = j as f64;
            lag[j + 1] = ((2.0 * jf + 1.0 + kf - b) * lag[j] - (jf + kf) * lag[j - 1]) / (jf + 1.0);
        }
        for m in 0..len {
            let n = m + k;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let ratio = (0.5 * (ln_factorial(m) - ln_factorial(n))).exp();
            let term = rho.get(m, n) * pow * (sign * ratio * lag[m]);
            total += if k == 0 { term.re } else { 2.0 * term.re };
        }
        pow *= two_alpha;
    }
    total * (-2.0 * alpha.norm_sqr()).exp() / PI
}

/// Square evaluation grid for Wigner surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for WignerGrid {
    fn default() -> Self {
        WignerGrid { min: -5.0, max: 5.0, points: 201 }
    }
}

impl WignerGrid {
    pub fn axis(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points).map(|i| self.min + i as f64 * step).collect()
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }
}

/// W on `grid`, indexed `[ix][ip]`. `tail_tol` overrides [`WIGNER_TAIL_TOL`]
/// (reconstructed states carry estimation noise in the top levels).
pub fn wigner_grid(rho: &DensityMatrix, grid: &WignerGrid, tail_tol: f64) -> Result<Vec<Vec<f64>>> {
    if grid.points < 2 || !(grid.max > grid.min) {
        return Err(Error::InvalidArgument("Wigner grid needs at least 2 points and max > min".into()));
    }
    check_tail(rho, tail_tol)?;
    let axis = grid.axis();
    Ok(axis
        .iter()
        .map(|&x| axis.iter().map(|&p| wigner_series(rho, x, p)).collect())
        .collect())
}

/// Mean and variance of x_θ = x cos θ + p sin θ.
pub fn quadrature_moments(rho: &DensityMatrix, theta: f64) -> (f64, f64) {
    let d = rho.dim();
    let mut a1 = Complex64::new(0.0, 0.0);
    let mut a2 = Complex64::new(0.0, 0.0);
    for m in 1..d {
        a1 += rho.get(m, m - 1) * (m as f64).sqrt();
        if m >= 2 {
            a2 += rho.get(m, m - 2) * ((m * (m - 1)) as f64).sqrt();
        }
    }
    let rot = Complex64::from_polar(1.0, -theta);
    let mean = 2f64.sqrt() * (rot * a1).re;
    let second = (rot * rot * a2).re + rho.mean_photon_number() + 0.5;
    (mean, second - mean * mean)
}

/// Pr(x | θ) = Σ ρ_mn ψ_m(x) ψ_n(x) e^{i(n−m)θ} on the sample points `xs`.
///
/// The points must cover at least six standard deviations on each side of the
/// mean.
pub fn quadrature_marginal(rho: &DensityMatrix, theta: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let (mean, var) = quadrature_moments(rho, theta);
    let sd = var.max(0.0).sqrt();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if xs.is_empty() || lo > mean - 6.0 * sd || hi < mean + 6.0 * sd {
        return Err(Error::InvalidArgument(format!(
            "marginal grid [{lo}, {hi}] does not cover mean {mean:.3} ± 6·{sd:.3}"
        )));
    }
    let re = rotated_real_part(rho, theta);
    let d = rho.dim();
    let mut psi = vec![0.0; d];
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        hermite_functions_into(x, &mut psi);
        let v = quadratic_form(&re, &psi, d);
        if v < -1e-10 {
            return Err(Error::NegativeDensity(v));
        }
        out.push(v.max(0.0));
    }
    Ok(out)
}

/// Re[ρ_mn e^{i(n−m)θ}] as a dense row-major d×d array.
pub(crate) fn rotated_real_part(rho: &DensityMatrix, theta: f64) -> Vec<f64> {
    let d = rho.dim();
    let mut out = vec![0.0; d * d];
    for m in 0..d {
        for n in 0..d {
            out[m * d + n] = (rho.get(m, n) * Complex64::from_polar(1.0, (n as f64 - m as f64) * theta)).re;
        }
    }
    out
}

#[inline]
pub(crate) fn quadratic_form(a: &[f64], v: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for m in 0..d {
        let row = &a[m * d..(m + 1) * d];
        let mut acc = 0.0;
        for n in 0..d {
            acc += row[n] * v[n];
        }
        s += v[m] * acc;
    }
    s
}
