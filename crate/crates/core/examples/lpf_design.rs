//! Three-pole low-pass filter matched to the filtered heralded mode.

use catfilter::temporal::{composite_mode, design_lpf, lpf_apply, rate_from_fwhm, TimeGrid};

fn main() -> catfilter::Result<()> {
    let grid = TimeGrid::default();
    let rates = [rate_from_fwhm(136e6), rate_from_fwhm(18.7e6), rate_from_fwhm(94e6), rate_from_fwhm(130e6)];
    let target = composite_mode(rates, 0.0, &grid)?;

    let design = design_lpf(&target)?;
    let tau_ns = design.coeffs.tau.map(|t| t * 1e9);
    println!("tau = {tau_ns:.2?} ns, readout delay {:.2} ns", design.delay * 1e9);
    println!("overlap with the target mode: {:.4}", design.overlap);

    // Impulse response on a 0.1 ns grid, which the recursion needs for accuracy.
    let dt = 0.1e-9;
    let mut impulse = vec![0.0; 800];
    impulse[0] = 1.0 / dt;
    let h = lpf_apply(&design.coeffs, &impulse, dt)?;
    let (k, peak) = h.iter().enumerate().fold((0, 0.0), |m, (k, &v)| if v > m.1 { (k, v) } else { m });
    println!("impulse response peaks at {:.1} ns ({peak:.3e})", k as f64 * dt * 1e9);
    Ok(())
}
