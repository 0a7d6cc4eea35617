use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{ln_binomial, DensityMatrix};
use crate::error::{Error, Result};

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

/// Amplitude of the Kraus element that removes `k` photons from |n⟩ through a
/// beamsplitter of transmissivity `eta`: √(C(n,k) η^{n−k} (1−η)^k).
fn kraus_amplitude(n: usize, k: usize, eta: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let loss = 1.0 - eta;
    if (eta == 0.0 && n > k) || (loss == 0.0 && k > 0) {
        return 0.0;
    }
    let mut ln = ln_binomial(n, k);
    if n > k {
        ln += (n - k) as f64 * eta.ln();
    }
    if k > 0 {
        ln += k as f64 * loss.ln();
    }
    (0.5 * ln).exp()
}

/// M_k ρ M_k† for the k-photon Kraus element, unnormalized.
fn kraus_term(rho: &DensityMatrix, k: usize, eta: f64) -> DMatrix<Complex64> {
    let d = rho.dim();
    let amp: Vec<f64> = (0..d).map(|n| kraus_amplitude(n, k, eta)).collect();
    let mut out = DMatrix::zeros(d, d);
    for m in 0..d.saturating_sub(k) {
        for n in 0..d - k {
            let a = amp[m + k] * amp[n + k];
            if a != 0.0 {
                out[(m, n)] = rho.get(m + k, n + k) * a;
            }
        }
    }
    out
}

/// Bosonic pure-loss channel with transmissivity `eta`, full Kraus sum.
pub fn apply_loss(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
    check_unit("transmissivity", eta)?;
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let d = rho.dim();
    let mut out = DMatrix::zeros(d, d);
    for k in 0..d {
        out += kraus_term(rho, k, eta);
    }
    DensityMatrix::from_channel_output(out)
}

/// Loss channel truncated to at most one lost photon, renormalized.
///
/// Keeps the no-loss and single-loss Kraus branches, E₀ = (1−L)^{n̂/2} and
/// E₁ = √L (1−L)^{(n̂−1)/2} a, and discards the multi-photon branches.
pub fn apply_loss_one_photon_approx(rho: &DensityMatrix, loss: f64) -> Result<DensityMatrix> {
    check_unit("loss", loss)?;
    if loss == 0.0 {
        return Ok(rho.clone());
    }
    let eta = 1.0 - loss;
    let out = kraus_term(rho, 0, eta) + kraus_term(rho, 1, eta);
    DensityMatrix::from_channel_output(out)
}

/// Probability that the tap of a beamsplitter (signal transmissivity `r`)
/// receives exactly `n_sub` photons.
pub fn herald_probability(rho: &DensityMatrix, r: f64, n_sub: usize) -> f64 {
    (0..rho.dim())
        .map(|n| kraus_amplitude(n, n_sub, r).powi(2) * rho.get(n, n).re)
        .sum()
}

/// Taps `rho` on a beamsplitter with reflectivity `r` toward the signal arm and
/// conditions on exactly `n_sub` photons in the tap. Returns the conditional
/// state and the herald probability.
pub fn photon_subtract(rho: &DensityMatrix, r: f64, n_sub: usize) -> Result<(DensityMatrix, f64)> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("reflectivity {r} outside (0, 1)")));
    }
    if !(1..=2).contains(&n_sub) {
        return Err(Error::InvalidArgument(format!("n_sub = {n_sub}; only 1 or 2 supported")));
    }
    let out = kraus_term(rho, n_sub, r);
    let p = out.trace().re;
    if !(p >= 1e-15) {
        return Err(Error::DegenerateHerald(p));
    }
    Ok((DensityMatrix::from_channel_output(out)?, p))
}

/// (1 − w)·ρ_a + w·ρ_b.
pub fn mix(rho_a: &DensityMatrix, rho_b: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
    check_unit("mixing weight", w)?;
    if rho_a.dim() != rho_b.dim() {
        return Err(Error::DimensionMismatch(rho_a.cutoff(), rho_b.cutoff()));
    }
    let out = rho_a.matrix() * Complex64::new(1.0 - w, 0.0) + rho_b.matrix() * Complex64::new(w, 0.0);
    DensityMatrix::from_channel_output(out)
}
