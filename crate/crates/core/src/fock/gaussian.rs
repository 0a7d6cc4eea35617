use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{apply_loss, ln_factorial, DensityMatrix};
use crate::error::{Error, Result};

/// Extra Fock levels used while building a lossy squeezed state before truncation.
const CONSTRUCTION_MARGIN: usize = 40;
const TAIL_LIMIT: f64 = 1e-4;

/// Single-mode Gaussian state with zero mean, described by its squeezed and
/// anti-squeezed quadrature variances (vacuum = 1/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianInModeState {
    pub v_minus: f64,
    pub v_plus: f64,
}

impl GaussianInModeState {
    pub fn new(v_minus: f64, v_plus: f64) -> Result<Self> {
        if !(v_minus > 0.0 && v_plus.is_finite() && v_minus <= v_plus + 1e-15) {
            return Err(Error::ModelViolation(format!(
                "variances must satisfy 0 < V- <= V+ (got {v_minus}, {v_plus})"
            )));
        }
        if v_minus * v_plus < 0.25 - 1e-12 {
            return Err(Error::ModelViolation(format!(
                "V-·V+ = {} violates the uncertainty bound 1/4",
                v_minus * v_plus
            )));
        }
        Ok(GaussianInModeState { v_minus, v_plus })
    }

    /// Pure squeezing `r` followed by a loss channel of fraction `loss`.
    pub fn from_effective(r: f64, loss: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) || !(0.0..=1.0).contains(&loss) {
            return Err(Error::InvalidArgument(format!("r = {r}, loss = {loss}")));
        }
        let eta = 1.0 - loss;
        Self::new(
            0.5 * (eta * (-2.0 * r).exp() + loss),
            0.5 * (eta * (2.0 * r).exp() + loss),
        )
    }

    /// Inverts V∓ = (1−L)e^{∓2r}/2 + L/2 for (r, L).
    ///
    /// Eliminating r gives V₋V₊ − 1/4 = (L/2)(V₋ + V₊ − 1), linear in L.
    /// The vacuum (V₋ = V₊ = 1/2) maps to (0, 0).
    pub fn effective(&self) -> Result<(f64, f64)> {
        let sum = self.v_minus + self.v_plus - 1.0;
        let excess = self.v_minus * self.v_plus - 0.25;
        if sum.abs() < 1e-14 {
            return Ok((0.0, 0.0));
        }
        let loss = (2.0 * excess / sum).max(0.0);
        if loss > 1.0 + 1e-12 {
            return Err(Error::ModelViolation(format!(
                "no lossy squeezed vacuum reproduces V- = {}, V+ = {} (L = {loss})",
                self.v_minus, self.v_plus
            )));
        }
        let loss = loss.min(1.0);
        if loss >= 1.0 - 1e-15 {
            return Ok((0.0, 1.0));
        }
        let r = 0.25 * ((self.v_plus - 0.5 * loss) / (self.v_minus - 0.5 * loss)).ln();
        Ok((r.max(0.0), loss))
    }

    pub fn purity(&self) -> f64 {
        0.5 / (self.v_minus * self.v_plus).sqrt()
    }
}

/// Fock amplitudes of the pure squeezed vacuum with the x quadrature
/// anti-squeezed: c_{2n} = √sech r · tanhⁿ r · √((2n)!)/(2ⁿ n!).
pub(crate) fn squeezed_amplitudes(r: f64, cutoff: usize) -> Vec<f64> {
    let t = r.tanh();
    let lead = 0.5 * (1.0 / r.cosh()).ln();
    (0..=cutoff)
        .map(|k| {
            if k % 2 == 1 {
                return 0.0;
            }
            let n = k / 2;
            if t == 0.0 {
                return if n == 0 { 1.0 } else { 0.0 };
            }
            let ln = lead + n as f64 * t.ln() + 0.5 * ln_factorial(2 * n)
                - n as f64 * 2f64.ln()
                - ln_factorial(n);
            ln.exp()
        })
        .collect()
}

/// Fock representation of the in-mode Gaussian state: pure squeezing r_eff
/// (anti-squeezed along x) through loss L_eff.
pub fn squeezed_vacuum(state: &GaussianInModeState, cutoff: usize) -> Result<DensityMatrix> {
    if cutoff < 10 {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} below minimum 10")));
    }
    let (r, loss) = state.effective()?;
    let big = cutoff + CONSTRUCTION_MARGIN;
    let amps = squeezed_amplitudes(r, big);
    let captured: f64 = amps.iter().map(|a| a * a).sum();
    if 1.0 - captured > TAIL_LIMIT {
        return Err(Error::CutoffTooSmall { cutoff, tail: 1.0 - captured });
    }
    let psi: Vec<Complex64> = amps.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    let lossy = apply_loss(&DensityMatrix::from_pure(&psi)?, 1.0 - loss)?;
    let tail: f64 = (cutoff + 1..=big).map(|n| lossy.get(n, n).re).sum();
    if tail > TAIL_LIMIT {
        return Err(Error::CutoffTooSmall { cutoff, tail });
    }
    lossy.resized(cutoff)
}
