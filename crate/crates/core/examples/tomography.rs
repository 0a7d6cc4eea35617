//! Closed-loop maximum-likelihood tomography of a lossy photon-subtracted state.

use catfilter::fock::{apply_loss, photon_subtract, squeezed_vacuum, wigner_origin, GaussianInModeState};
use catfilter::simulate::sample_state_quadratures;
use catfilter::tomography::{mle_reconstruct, MleOptions};

fn main() -> catfilter::Result<()> {
    let sq = squeezed_vacuum(&GaussianInModeState::from_effective(0.51, 0.0)?, 20)?;
    let truth = apply_loss(&photon_subtract(&sq, 0.97, 1)?.0, 0.9)?.resized(15)?;

    let phases: Vec<f64> = (0..12).map(|k| (15.0 * k as f64).to_radians()).collect();
    let samples = sample_state_quadratures(&truth, &phases, 5000, 7)?;
    let out = mle_reconstruct(&samples, &MleOptions::default())?;
    println!("{} iterations, converged: {}", out.iterations, out.converged);
    println!("W(0,0): true {:+.4}, reconstructed {:+.4}", wigner_origin(&truth), wigner_origin(&out.rho));
    println!("fidelity to the true state: {:.4}", out.rho.fidelity(&truth)?);
    Ok(())
}
