//! Truncated Fock-space state algebra.
//!
//! Quadratures follow x = (a + a†)/√2, so the vacuum variance is 1/2 and the
//! Wigner function of the vacuum peaks at 1/π.

mod cat;
mod channels;
mod gaussian;
mod metrics;

pub use cat::{best_cat_fidelity, cat_state, cat_vector, fidelity_to_cat, CatFit, Parity};
pub use channels::{apply_loss, apply_loss_one_photon_approx, herald_probability, mix, photon_subtract};
pub use gaussian::{squeezed_vacuum, GaussianInModeState};
pub use metrics::{
    even_sum, photon_distribution, quadrature_marginal, quadrature_moments, wigner, wigner_grid,
    wigner_origin, WignerGrid, WIGNER_TAIL_TOL,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Fock cutoff for state construction.
pub const DEFAULT_CUTOFF: usize = 20;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGEN_TOL: f64 = 1e-10;

/// Density operator on the Fock space {|0⟩, …, |N_cut⟩}.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps a matrix after checking Hermiticity, unit trace and positivity.
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Result<Self> {
        let rho = DensityMatrix { mat };
        rho.validate()?;
        Ok(rho)
    }

    /// Symmetrizes and renormalizes a matrix produced by a trace-preserving map.
    /// Only for internal use on outputs of maps known to be CP.
    pub(crate) fn from_channel_output(mut mat: DMatrix<Complex64>) -> Result<Self> {
        let adj = mat.adjoint();
        mat = (mat + adj) * Complex64::new(0.5, 0.0);
        let tr = mat.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::ModelViolation(format!("channel output has trace {tr}")));
        }
        mat /= Complex64::new(tr, 0.0);
        Ok(DensityMatrix { mat })
    }

    pub fn vacuum(cutoff: usize) -> Self {
        Self::fock(0, cutoff).expect("vacuum always fits")
    }

    pub fn fock(n: usize, cutoff: usize) -> Result<Self> {
        if n > cutoff {
            return Err(Error::InvalidArgument(format!("|{n}⟩ outside cutoff {cutoff}")));
        }
        let mut mat = DMatrix::zeros(cutoff + 1, cutoff + 1);
        mat[(n, n)] = Complex64::new(1.0, 0.0);
        Ok(DensityMatrix { mat })
    }

    /// |ψ⟩⟨ψ| for an (unnormalized) state vector.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if psi.is_empty() || !(norm > 0.0) {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|c| c / norm));
        Ok(DensityMatrix { mat: &v * v.adjoint() })
    }

    pub fn cutoff(&self) -> usize {
        self.mat.nrows() - 1
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.mat[(m, n)]
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.mat[(n, n)].re).sum()
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = nalgebra::SymmetricEigen::new(self.mat.clone());
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Checks the DensityMatrix invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.mat.nrows();
        if n == 0 || n != self.mat.ncols() {
            return Err(Error::ModelViolation("density matrix must be square and non-empty".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let d = (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm();
                if !(d <= HERMITIAN_TOL) {
                    return Err(Error::ModelViolation(format!("not Hermitian at ({i},{j}): {d:.3e}")));
                }
            }
        }
        let tr = self.trace();
        if !((tr - 1.0).abs() <= TRACE_TOL) {
            return Err(Error::ModelViolation(format!("trace {tr}")));
        }
        let min = self.eigenvalues()[0];
        if min < -EIGEN_TOL {
            return Err(Error::ModelViolation(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// Population of the highest retained Fock level.
    pub fn top_population(&self) -> f64 {
        self.mat[(self.cutoff(), self.cutoff())].re
    }

    /// Embeds into a larger space or truncates (and renormalizes) to `cutoff`.
    pub fn resized(&self, cutoff: usize) -> Result<Self> {
        let d = cutoff + 1;
        let keep = d.min(self.dim());
        let mut mat = DMatrix::zeros(d, d);
        mat.view_mut((0, 0), (keep, keep))
            .copy_from(&self.mat.view((0, 0), (keep, keep)));
        Self::from_channel_output(mat)
    }

    /// e^{iδn̂} ρ e^{−iδn̂}: maps the marginal at LO phase θ to phase θ + δ.
    pub fn rotated(&self, delta: f64) -> Self {
        let mut mat = self.mat.clone();
        for m in 0..self.dim() {
            for n in 0..self.dim() {
                mat[(m, n)] *= Complex64::from_polar(1.0, delta * (m as f64 - n as f64));
            }
        }
        DensityMatrix { mat }
    }

    /// Uhlmann fidelity (tr √(√ρ σ √ρ))². States of different cutoffs are
    /// compared in the larger space.
    pub fn fidelity(&self, other: &DensityMatrix) -> Result<f64> {
        let d = self.dim().max(other.dim());
        let a = self.padded(d);
        let b = other.padded(d);
        let sa = psd_sqrt(&a);
        let m = &sa * b * &sa;
        let eig = nalgebra::SymmetricEigen::new((&m + m.adjoint()) * Complex64::new(0.5, 0.0));
        let s: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
        Ok(s * s)
    }

    fn padded(&self, d: usize) -> DMatrix<Complex64> {
        let mut mat = DMatrix::zeros(d, d);
        let k = self.dim();
        mat.view_mut((0, 0), (k, k)).copy_from(&self.mat);
        mat
    }

    pub fn to_json_value(&self) -> DensityMatrixJson {
        let d = self.dim();
        DensityMatrixJson {
            dim: self.cutoff(),
            re: (0..d).map(|i| (0..d).map(|j| self.mat[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| self.mat[(i, j)].im).collect()).collect(),
        }
    }

    pub fn from_json_value(j: &DensityMatrixJson) -> Result<Self> {
        let d = j.dim + 1;
        if j.re.len() != d || j.im.len() != d || j.re.iter().chain(&j.im).any(|r| r.len() != d) {
            return Err(Error::Schema(format!(
                "density matrix JSON: expected {d}x{d} re/im arrays for cutoff {}",
                j.dim
            )));
        }
        let mat = DMatrix::from_fn(d, d, |r, c| Complex64::new(j.re[r][c], j.im[r][c]));
        Self::from_matrix(mat)
    }
}

/// Serialized form: `dim` is the Fock cutoff N_cut, matrices are (N_cut+1)².
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DensityMatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

pub(crate) fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let d = m.nrows();
    let mut out = DMatrix::zeros(d, d);
    for k in 0..d {
        let l = eig.eigenvalues[k].max(0.0).sqrt();
        if l == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()) * Complex64::new(l, 0.0);
    }
    out
}

/// ln C(n, k).
pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_and_fock_are_valid() {
        DensityMatrix::vacuum(20).validate().unwrap();
        let one = DensityMatrix::fock(1, 10).unwrap();
        one.validate().unwrap();
        assert_eq!(one.cutoff(), 10);
        assert!(DensityMatrix::fock(11, 10).is_err());
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(DensityMatrix::from_matrix(m).is_err());
    }

    #[test]
    fn rejects_negative_eigenvalue() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.2, 0.0);
        m[(1, 1)] = Complex64::new(-0.2, 0.0);
        assert!(matches!(DensityMatrix::from_matrix(m), Err(Error::ModelViolation(_))));
    }

    #[test]
    fn json_roundtrip_and_schema_check() {
        let rho = DensityMatrix::from_pure(&[
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        let j = rho.to_json_value();
        assert_eq!(j.dim, 2);
        let text = serde_json::to_string(&j).unwrap();
        let back = DensityMatrix::from_json_value(&serde_json::from_str(&text).unwrap()).unwrap();
        assert!((&back.mat - &rho.mat).norm() < 1e-15);

        let mut bad = j.clone();
        bad.dim = 3;
        assert!(matches!(DensityMatrix::from_json_value(&bad), Err(Error::Schema(_))));
    }

    #[test]
    fn fidelity_of_orthogonal_and_identical_states() {
        let a = DensityMatrix::fock(1, 5).unwrap();
        let b = DensityMatrix::fock(2, 8).unwrap();
        assert!(a.fidelity(&b).unwrap().abs() < 1e-12);
        assert!((a.fidelity(&a).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rotation_keeps_populations() {
        let rho = DensityMatrix::from_pure(&[
            Complex64::new(0.6, 0.0),
            Complex64::new(0.8, 0.0),
        ])
        .unwrap();
        let r = rho.rotated(0.7);
        r.validate().unwrap();
        assert!((r.get(0, 1) - Complex64::from_polar(0.48, -0.7)).norm() < 1e-12);
    }
}

#[cfg(test)]
pub(crate) fn odd_sum_for_tests(rho: &DensityMatrix) -> f64 {
    1.0 - even_sum(rho)
}
