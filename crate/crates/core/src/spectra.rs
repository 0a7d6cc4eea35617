//! OPO quadrature noise spectra and the Gaussian state they leave in a wave packet.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::GaussianInModeState;
use crate::temporal::{mode_power_spectrum, TemporalMode};

/// Fraction of the variance integrand allowed in the top tenth of the band.
const BAND_EDGE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    /// Squeezed, S₋.
    Minus,
    /// Anti-squeezed, S₊.
    Plus,
}

/// Below-threshold OPO output spectrum, shot-noise normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingSpectrum {
    /// Normalized pump amplitude ξ.
    pub xi: f64,
    /// Total external loss.
    pub loss: f64,
    /// OPO half bandwidth in Hz.
    pub f_hwhm: f64,
}

impl SqueezingSpectrum {
    pub fn new(xi: f64, loss: f64, f_hwhm: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&xi) {
            return Err(Error::InvalidArgument(format!("xi = {xi} must be in [0, 1)")));
        }
        if !(0.0..=1.0).contains(&loss) {
            return Err(Error::InvalidArgument(format!("loss = {loss} outside [0, 1]")));
        }
        if !(f_hwhm > 0.0 && f_hwhm.is_finite()) {
            return Err(Error::InvalidArgument(format!("f_hwhm = {f_hwhm}")));
        }
        Ok(SqueezingSpectrum { xi, loss, f_hwhm })
    }

    /// S±(f) = 1 ± (1−L)·4ξ/((1∓ξ)² + (f/f_HWHM)²).
    pub fn value(&self, f: f64, q: Quadrature) -> f64 {
        let u = f / self.f_hwhm;
        let (sign, d) = match q {
            Quadrature::Minus => (-1.0, 1.0 + self.xi),
            Quadrature::Plus => (1.0, 1.0 - self.xi),
        };
        1.0 + sign * (1.0 - self.loss) * 4.0 * self.xi / (d * d + u * u)
    }

    /// S_θ = S₊cos²θ + S₋sin²θ, with θ = 0 the anti-squeezed quadrature.
    pub fn at_phase(&self, f: f64, theta: f64) -> f64 {
        let c = theta.cos();
        let s = theta.sin();
        self.value(f, Quadrature::Plus) * c * c + self.value(f, Quadrature::Minus) * s * s
    }
}

pub fn squeezing_spectrum(s: &SqueezingSpectrum, f: f64, q: Quadrature) -> f64 {
    s.value(f.abs(), q)
}

/// ξ = √(P/P_th).
pub fn pump_to_xi(p: f64, p_th: f64) -> Result<f64> {
    if !(p >= 0.0) || !(p < p_th) {
        return Err(Error::InvalidArgument(format!("pump {p} mW must lie in [0, {p_th}) mW")));
    }
    Ok((p / p_th).sqrt())
}

/// Threshold implied by one (P, ξ) pair under the square-root law.
pub fn threshold_from(p: f64, xi: f64) -> Result<f64> {
    if !(p > 0.0) || !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidArgument(format!("cannot calibrate from P = {p}, xi = {xi}")));
    }
    Ok(p / (xi * xi))
}

/// Squeezing parameter of the lossless DC component: e^{−2r} = S₋(0).
pub fn dc_squeezing_parameter(xi: f64) -> f64 {
    ((1.0 + xi) / (1.0 - xi)).ln()
}

/// V∓ = ½ ∫|F(ω)|² S∓(ω) dω/2π on the mode's own FFT grid.
pub fn wavepacket_variances(mode: &TemporalMode, s: &SqueezingSpectrum) -> Result<GaussianInModeState> {
    let spec = mode_power_spectrum(mode);
    let f_max = spec.freq.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let mut v = [0.0; 2];
    let mut edge = [0.0; 2];
    for (f, p) in spec.freq.iter().zip(&spec.power) {
        for (i, q) in [Quadrature::Minus, Quadrature::Plus].into_iter().enumerate() {
            let w = p * s.value(f.abs(), q) * spec.df;
            v[i] += w;
            if f.abs() > 0.9 * f_max {
                edge[i] += w;
            }
        }
    }
    let tail = (edge[0] / v[0]).max(edge[1] / v[1]);
    if tail > BAND_EDGE_TOL {
        return Err(Error::SeriesTail(tail));
    }
    GaussianInModeState::new(0.5 * v[0], 0.5 * v[1])
}

/// (r_eff, L_eff) of a wave-packet state.
pub fn effective_params(g: &GaussianInModeState) -> Result<(f64, f64)> {
    g.effective()
}
