mod common;

use catfilter::spectra::{effective_params, wavepacket_variances, Quadrature, SqueezingSpectrum};
use catfilter::temporal::{
    composite_mode, design_lpf, inner_product, lpf_apply, rate_from_fwhm, FilterCoefficients,
    TemporalMode, TimeGrid,
};
use proptest::prelude::*;

fn table_rates() -> [f64; 4] {
    [rate_from_fwhm(136e6), rate_from_fwhm(18.7e6), rate_from_fwhm(94e6), rate_from_fwhm(130e6)]
}

#[test]
fn composite_mode_matches_convolution() {
    let grid = TimeGrid::centered(0.05e-9, 32768).unwrap();
    let analytic = composite_mode(table_rates(), 0.0, &grid).unwrap();
    let oracle = common::fft_convolution_oracle(table_rates(), &grid);
    let ov = TemporalMode::from_samples(grid, 0.0, oracle).and_then(|o| inner_product(&analytic, &o)).unwrap();
    assert!(ov > 0.9999, "{ov}");
}

#[test]
fn normalization_and_continuity() {
    let grid = TimeGrid::centered(0.05e-9, 32768).unwrap();
    let m = composite_mode(table_rates(), 0.0, &grid).unwrap();
    let d = m.descriptor.unwrap();
    let raw: f64 = grid.times().iter().map(|&t| {
        let b = d.bracket(t);
        b * b
    }).sum::<f64>() * grid.dt;
    assert!((raw.sqrt() * d.norm - 1.0).abs() < 1e-4, "{}", raw.sqrt() * d.norm);
    let (l, r) = d.limits_at_t0();
    assert!((l - r).abs() <= 1e-9 * l.abs().max(1.0), "{l} {r}");
}

/// Closed-form cascade response: γ₁γ₂γ₃ Σᵢ e^{−γᵢt}/Πⱼ≠ᵢ(γⱼ−γᵢ), up to a gain.
fn cascade_oracle(tau: [f64; 3], t: f64) -> f64 {
    let g = tau.map(|x| 1.0 / x);
    (0..3)
        .map(|i| {
            let den: f64 = (0..3).filter(|&j| j != i).map(|j| g[j] - g[i]).product();
            (-g[i] * t).exp() / den
        })
        .sum::<f64>()
        * g[0]
        * g[1]
        * g[2]
}

#[test]
fn lpf_impulse_response_matches_closed_form() {
    let tau = [12e-9, 4e-9, 2.5e-9];
    let c = FilterCoefficients::new(tau).unwrap();
    let dt = 0.02e-9;
    let n = 6000;
    let mut u = vec![0.0; n];
    u[0] = 1.0 / dt;
    let y = lpf_apply(&c, &u, dt).unwrap();
    let want: Vec<f64> = (0..n).map(|k| cascade_oracle(tau, k as f64 * dt)).collect();
    // compare shapes: gain normalizations differ by construction
    let scale = y.iter().zip(&want).map(|(a, b)| a * b).sum::<f64>() / want.iter().map(|b| b * b).sum::<f64>();
    let peak = want.iter().cloned().fold(0.0, f64::max) * scale;
    let rms = (y.iter().zip(&want).map(|(a, b)| (a - scale * b).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!(rms / peak < 1e-3, "{}", rms / peak);
    assert!(y.iter().all(|&v| v >= -1e-12 * peak));
}

#[test]
fn lpf_white_noise_variance() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let tau = [8e-9, 3e-9, 2e-9];
    let c = FilterCoefficients::new(tau).unwrap();
    let dt: f64 = 0.1e-9;
    let n = 400_000;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    // white noise with two-sided PSD 1 has per-sample variance 1/dt
    let u: Vec<f64> = (0..n).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); z / dt.sqrt() }).collect();
    let y = lpf_apply(&c, &u, dt).unwrap();
    let var = y[2000..].iter().map(|v| v * v).sum::<f64>() / (n - 2000) as f64;
    // the closed form has unit DC gain, so the output is gain · (h ⊛ u) and var = gain² ∫h² dt
    let hh = 0.005e-9;
    let energy: f64 = (0..200_000).map(|k| cascade_oracle(tau, k as f64 * hh).powi(2)).sum::<f64>() * hh;
    let want = energy * c.gain * c.gain;
    assert!((var / want - 1.0).abs() < 0.02, "{var} vs {want}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn lpf_design_is_translation_invariant(shift in -200i32..200) {
        let grid = TimeGrid::default();
        let target = composite_mode(table_rates(), 0.0, &grid).unwrap();
        let moved = composite_mode(table_rates(), shift as f64 * grid.dt, &grid).unwrap();
        let a = design_lpf(&target).unwrap().overlap;
        let b = design_lpf(&moved).unwrap().overlap;
        prop_assert!((a - b).abs() < 2e-4, "{a} vs {b}");
    }

    #[test]
    fn spectra_tend_to_shot_noise(xi in 0.0f64..0.95, loss in 0.0f64..1.0, f1 in 0.0f64..5e8, df in 0.0f64..5e8) {
        let s = SqueezingSpectrum::new(xi, loss, 65e6).unwrap();
        let (a, b) = (f1, f1 + df);
        prop_assert!(s.value(a, Quadrature::Minus) <= s.value(b, Quadrature::Minus) + 1e-15);
        prop_assert!(s.value(a, Quadrature::Plus) >= s.value(b, Quadrature::Plus) - 1e-15);
        prop_assert!(s.value(b, Quadrature::Minus) <= 1.0 && s.value(b, Quadrature::Plus) >= 1.0);
    }
}

#[test]
fn wavepacket_states_respect_uncertainty_and_purify_with_narrow_filters() {
    let grid = TimeGrid::centered(0.1e-9, 32768).unwrap();
    let s = SqueezingSpectrum::new(0.3, 0.0, 65e6).unwrap();
    let mut last = f64::INFINITY;
    for fwhm in [60e6, 30e6, 15e6, 7.5e6, 3.75e6] {
        let mut rates = table_rates();
        rates[1] = rate_from_fwhm(fwhm);
        let m = composite_mode(rates, 0.0, &grid).unwrap();
        let g = wavepacket_variances(&m, &s).unwrap();
        assert!(g.v_minus * g.v_plus >= 0.25 - 1e-12);
        let (_, l) = effective_params(&g).unwrap();
        assert!(l < last, "{fwhm}: {l} !< {last}");
        last = l;
    }
    assert!(last < 0.005, "{last}");
}
