//! Maximum-likelihood state reconstruction from phase-resolved homodyne samples.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::hermite::hermite_functions_into;

/// Floor applied to outcome probabilities inside the log-likelihood.
pub const PROB_FLOOR: f64 = 1e-300;
const MIN_DILUTION: f64 = 1e-6;

/// Samples of one channel at one LO phase (radians).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSamples {
    pub theta: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub cutoff: usize,
    pub max_iter: usize,
    /// Stop once the relative log-likelihood gain of an iteration falls below this.
    pub tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions { cutoff: 15, max_iter: 2000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Hermite-function values ψₙ(x) for every sample, one row per sample.
struct PhaseBlock {
    theta: f64,
    psi: DMatrix<f64>,
}

/// Precomputed projector data for a set of phase samples.
pub struct ProjectorCache {
    blocks: Vec<PhaseBlock>,
    dim: usize,
    total: usize,
}

impl ProjectorCache {
    pub fn new(samples: &[PhaseSamples], cutoff: usize) -> Result<Self> {
        check_coverage(samples)?;
        let dim = cutoff + 1;
        let mut buf = vec![0.0; dim];
        let blocks = samples
            .iter()
            .map(|s| {
                let mut psi = DMatrix::zeros(s.x.len(), dim);
                for (i, &x) in s.x.iter().enumerate() {
                    hermite_functions_into(x, &mut buf);
                    for n in 0..dim {
                        psi[(i, n)] = buf[n];
                    }
                }
                PhaseBlock { theta: s.theta, psi }
            })
            .collect();
        Ok(ProjectorCache { blocks, dim, total: samples.iter().map(|s| s.x.len()).sum() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample_count(&self) -> usize {
        self.total
    }

    /// Log-likelihood of `rho` and, optionally, the normalized R operator.
    fn evaluate(&self, rho: &DMatrix<Complex64>, want_r: bool) -> (f64, Option<DMatrix<Complex64>>) {
        let d = self.dim;
        let mut ll = 0.0;
        let mut r = want_r.then(|| DMatrix::<Complex64>::zeros(d, d));
        for b in &self.blocks {
            // Re[ρ_mn e^{i(n−m)θ}]
            let a = DMatrix::from_fn(d, d, |m, n| {
                (rho[(m, n)] * Complex64::from_polar(1.0, (n as f64 - m as f64) * b.theta)).re
            });
            let pa = &b.psi * &a;
            let mut w = vec![0.0; b.psi.nrows()];
            for (i, wi) in w.iter_mut().enumerate() {
                let p = pa.row(i).dot(&b.psi.row(i)).max(PROB_FLOOR);
                ll += p.ln();
                *wi = 1.0 / p;
            }
            if let Some(r) = r.as_mut() {
                let mut scaled = b.psi.clone();
                for (i, wi) in w.iter().enumerate() {
                    scaled.row_mut(i).scale_mut(*wi);
                }
                let rt = b.psi.transpose() * scaled;
                for m in 0..d {
                    for n in 0..d {
                        r[(m, n)] += Complex64::from_polar(rt[(m, n)], (m as f64 - n as f64) * b.theta);
                    }
                }
            }
        }
        if let Some(r) = r.as_mut() {
            *r /= Complex64::new(self.total as f64, 0.0);
        }
        (ll, r)
    }

    pub fn log_likelihood(&self, rho: &DensityMatrix) -> Result<f64> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch(rho.dim(), self.dim));
        }
        Ok(self.evaluate(rho.matrix(), false).0)
    }
}

fn check_coverage(samples: &[PhaseSamples]) -> Result<()> {
    let mut phases: Vec<f64> = samples.iter().filter(|s| !s.x.is_empty()).map(|s| s.theta).collect();
    phases.sort_by(f64::total_cmp);
    phases.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if phases.len() < 2 {
        return Err(Error::PhaseCoverage(format!("{} distinct phase(s); need at least 2", phases.len())));
    }
    let span = phases[phases.len() - 1] - phases[0];
    if span <= std::f64::consts::FRAC_PI_2 {
        return Err(Error::PhaseCoverage(format!("phases span {:.1} deg; need more than 90", span.to_degrees())));
    }
    Ok(())
}

fn normalized(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let tr = m.trace().re;
    (&m + m.adjoint()) * Complex64::new(0.5 / tr, 0.0)
}

/// Iterative RρR reconstruction starting from the maximally mixed state.
pub fn mle_reconstruct(samples: &[PhaseSamples], opts: &MleOptions) -> Result<MleResult> {
    let cache = ProjectorCache::new(samples, opts.cutoff)?;
    mle_with_cache(&cache, opts)
}

pub fn mle_with_cache(cache: &ProjectorCache, opts: &MleOptions) -> Result<MleResult> {
    let d = cache.dim();
    let mut rho = DMatrix::<Complex64>::identity(d, d) / Complex64::new(d as f64, 0.0);
    let (mut ll, mut r) = cache.evaluate(&rho, true);
    let eye = DMatrix::<Complex64>::identity(d, d);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let rr = r.take().expect("R is computed each iteration");
        let mut step = normalized(&rr * &rho * &rr);
        let (mut next_ll, mut next_r) = cache.evaluate(&step, true);
        let mut eps = 1.0;
        while next_ll < ll {
            if eps < MIN_DILUTION {
                return Err(Error::LikelihoodDecrease { iteration: iterations, before: ll, after: next_ll });
            }
            let g = &eye + &rr * Complex64::new(eps, 0.0);
            step = normalized(&g * &rho * &g);
            (next_ll, next_r) = cache.evaluate(&step, true);
            eps *= 0.5;
        }
        let gain = (next_ll - ll) / ll.abs().max(1.0);
        rho = step;
        ll = next_ll;
        r = next_r;
        if gain < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("RρR stopped at max_iter = {} without reaching tol = {:e}", opts.max_iter, opts.tol);
    }
    Ok(MleResult { rho: DensityMatrix::from_matrix(rho)?, log_likelihood: ll, iterations, converged })
}
