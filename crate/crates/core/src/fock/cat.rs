use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ln_factorial, DensityMatrix};
use crate::error::{Error, Result};
use crate::optimize::golden_section_max;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Plus,
    Minus,
}

/// Optimal cat fit: fidelity and the real amplitude achieving it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatFit {
    pub fidelity: f64,
    pub alpha: f64,
}

impl CatFit {
    pub fn alpha_sq(&self) -> f64 {
        self.alpha * self.alpha
    }
}

/// Normalized Fock amplitudes of |α⟩ ± |−α⟩ up to `cutoff`.
pub fn cat_vector(alpha: Complex64, parity: Parity, cutoff: usize) -> Result<Vec<Complex64>> {
    if alpha.norm_sqr() > cutoff as f64 / 4.0 {
        return Err(Error::InvalidArgument(format!(
            "|α|² = {:.3} exceeds cutoff/4 = {:.3}",
            alpha.norm_sqr(),
            cutoff as f64 / 4.0
        )));
    }
    let keep = match parity {
        Parity::Plus => 0,
        Parity::Minus => 1,
    };
    let mut v = vec![Complex64::new(0.0, 0.0); cutoff + 1];
    let ln_abs = alpha.norm().ln();
    let phase = alpha.arg();
    for (n, c) in v.iter_mut().enumerate() {
        if n % 2 != keep || (n > 0 && alpha.norm() == 0.0) {
            continue;
        }
        let mag = if n == 0 { 1.0 } else { (n as f64 * ln_abs - 0.5 * ln_factorial(n)).exp() };
        *c = Complex64::from_polar(mag, n as f64 * phase);
    }
    // the α → 0 minus cat tends to |1⟩
    if keep == 1 && alpha.norm() == 0.0 {
        v[1] = Complex64::new(1.0, 0.0);
    }
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Ok(v.into_iter().map(|c| c / norm).collect())
}

pub fn cat_state(alpha: Complex64, parity: Parity, cutoff: usize) -> Result<DensityMatrix> {
    DensityMatrix::from_pure(&cat_vector(alpha, parity, cutoff)?)
}

/// ⟨Ψ_cat|ρ|Ψ_cat⟩.
pub fn fidelity_to_cat(rho: &DensityMatrix, alpha: Complex64, parity: Parity) -> Result<f64> {
    let psi = cat_vector(alpha, parity, rho.cutoff())?;
    let d = rho.dim();
    let mut f = Complex64::new(0.0, 0.0);
    for m in 0..d {
        if psi[m].norm_sqr() == 0.0 {
            continue;
        }
        for n in 0..d {
            f += psi[m].conj() * rho.get(m, n) * psi[n];
        }
    }
    Ok(f.re)
}

/// Maximizes the cat fidelity over real α ∈ [0.1, min(3, √(N_cut/4))].
pub fn best_cat_fidelity(rho: &DensityMatrix, parity: Parity) -> Result<CatFit> {
    let hi = 3f64.min((rho.cutoff() as f64 / 4.0).sqrt());
    let (alpha, fidelity) = golden_section_max(
        |a| fidelity_to_cat(rho, Complex64::new(a, 0.0), parity).unwrap_or(f64::NEG_INFINITY),
        0.1,
        hi,
        1e-4,
        200,
    )?;
    Ok(CatFit { fidelity, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{odd_sum_for_tests, photon_subtract, squeezed_vacuum, GaussianInModeState};

    #[test]
    fn small_minus_cat_is_single_photon() {
        let one = DensityMatrix::fock(1, 10).unwrap();
        let f = fidelity_to_cat(&one, Complex64::new(1e-3, 0.0), Parity::Minus).unwrap();
        assert!(f > 1.0 - 1e-6);
        let f0 = fidelity_to_cat(&one, Complex64::new(0.0, 0.0), Parity::Minus).unwrap();
        assert!((f0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pure_cat_self_fidelity() {
        for &a in &[0.5, 1.0, 1.5] {
            let cat = cat_state(Complex64::new(a, 0.0), Parity::Minus, 20).unwrap();
            let f = fidelity_to_cat(&cat, Complex64::new(a, 0.0), Parity::Minus).unwrap();
            assert!((f - 1.0).abs() < 1e-12);
            let fit = best_cat_fidelity(&cat, Parity::Minus).unwrap();
            assert!((fit.alpha - a).abs() < 1e-3, "{a} {fit:?}");
        }
    }

    #[test]
    fn coefficients_match_coherent_superposition() {
        // |α⟩ − |−α⟩ from explicit coherent amplitudes e^{−|α|²/2} αⁿ/√n!
        let a = 1.2f64;
        let v = cat_vector(Complex64::new(a, 0.0), Parity::Minus, 20).unwrap();
        let coh: Vec<f64> = (0..=20u32)
            .map(|n| (-a * a / 2.0).exp() * a.powi(n as i32) / (ln_factorial(n as usize)).exp().sqrt())
            .collect();
        let raw: Vec<f64> = coh.iter().enumerate().map(|(n, c)| c - c * (-1f64).powi(n as i32)).collect();
        let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
        for n in 0..=20 {
            assert!((v[n].re - raw[n] / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_sign_symmetry() {
        let g = GaussianInModeState::from_effective(0.5, 0.1).unwrap();
        let (rho, _) = photon_subtract(&squeezed_vacuum(&g, 20).unwrap(), 0.97, 1).unwrap();
        let a = fidelity_to_cat(&rho, Complex64::new(1.0, 0.0), Parity::Minus).unwrap();
        let b = fidelity_to_cat(&rho, Complex64::new(-1.0, 0.0), Parity::Minus).unwrap();
        assert!((a - b).abs() < 1e-12);
        let fit = best_cat_fidelity(&rho, Parity::Minus).unwrap();
        assert!(fit.fidelity <= odd_sum_for_tests(&rho) + 1e-12);
    }

    #[test]
    fn rejects_large_amplitude() {
        assert!(cat_vector(Complex64::new(3.0, 0.0), Parity::Plus, 20).is_err());
    }
}
