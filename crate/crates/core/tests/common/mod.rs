#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use catfilter::fock::DensityMatrix;
use catfilter::simulate::{Estimator, ExperimentConfig};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use catfilter::temporal::TimeGrid;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn bundled(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(config_path(name)).expect("bundled config loads")
}

/// A cheap acquisition for tests: four phases, analytic mode.
pub fn small_config(events: usize, seed: u64) -> ExperimentConfig {
    let mut cfg = bundled("paper_xi025.toml");
    cfg.seed = seed;
    cfg.acquisition.phases_deg = vec![0.0, 45.0, 90.0, 135.0];
    cfg.acquisition.events_per_phase = events;
    cfg.analysis.estimator = Estimator::Theory;
    cfg
}

/// Random full-rank state G G† / tr with complex Gaussian G, support below `support`.
pub fn random_state(cutoff: usize, support: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cutoff + 1;
    let g = DMatrix::from_fn(d, d, |m, _| {
        if m < support {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let a = &g * g.adjoint();
    let tr = a.trace();
    let a = a / tr;
    DensityMatrix::from_matrix((&a + a.adjoint()) * Complex64::new(0.5, 0.0)).expect("valid state")
}

pub fn random_unit<R: Rng>(rng: &mut R) -> f64 {
    rng.random()
}

/// Hermite functions ψ₀..ψ_{n-1} at x, by the textbook recursion.
pub fn oracle_hermite(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n > 1 {
        out[1] = 2f64.sqrt() * x * out[0];
    }
    for k in 2..n {
        out[k] = (2.0 / k as f64).sqrt() * x * out[k - 1] - ((k - 1) as f64 / k as f64).sqrt() * out[k - 2];
    }
    out
}

/// W(0,0) from the integral definition (1/π)∫⟨y|ρ|−y⟩dy.
pub fn oracle_wigner_origin(rho: &DensityMatrix) -> f64 {
    let d = rho.dim();
    let (lo, hi, n) = (-12.0, 12.0, 4801);
    let h = (hi - lo) / (n - 1) as f64;
    let mut acc = 0.0;
    for k in 0..n {
        let y = lo + k as f64 * h;
        let a = oracle_hermite(y, d);
        let b = oracle_hermite(-y, d);
        let mut v = 0.0;
        for m in 0..d {
            for nn in 0..d {
                v += (rho.get(m, nn) * a[m] * b[nn]).re;
            }
        }
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        acc += w * v * h;
    }
    acc / PI
}

/// e^{−γ₄|t|} convolved with three time-reversed one-sided exponentials, by FFT.
pub fn fft_convolution_oracle(rates: [f64; 4], grid: &TimeGrid) -> Vec<f64> {
    let n = 2 * grid.len;
    let t = |k: usize| grid.time(k);
    let mut acc: Vec<Complex64> = {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..grid.len {
            v[k] = Complex64::new((-rates[3] * t(k).abs()).exp(), 0.0);
        }
        v
    };
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    fwd.process(&mut acc);
    for &g in &rates[..3] {
        // kernel e^{γs} for s ≤ 0, stored with wrap-around for negative lags
        let mut k = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..grid.len {
            let s = -(j as f64) * grid.dt;
            k[(n - j) % n] = Complex64::new((g * s).exp() * grid.dt, 0.0);
        }
        fwd.process(&mut k);
        for (a, b) in acc.iter_mut().zip(&k) {
            *a *= b;
        }
    }
    inv.process(&mut acc);
    let out: Vec<f64> = acc[..grid.len].iter().map(|c| c.re).collect();
    let norm = (out.iter().map(|v| v * v).sum::<f64>() * grid.dt).sqrt();
    out.iter().map(|v| v / norm).collect()
}

