//! Photon subtraction from a squeezed vacuum, with loss and mixing, in the Fock basis.

use catfilter::fock::{
    apply_loss, best_cat_fidelity, even_sum, mix, photon_distribution, photon_subtract, squeezed_vacuum,
    wigner_origin, GaussianInModeState, Parity,
};
use catfilter::spectra::dc_squeezing_parameter;

fn main() -> catfilter::Result<()> {
    let r = dc_squeezing_parameter(0.25);
    let sq = squeezed_vacuum(&GaussianInModeState::from_effective(r, 0.0)?, 20)?;
    let (cat, p_herald) = photon_subtract(&sq, 0.97, 1)?;
    println!("r = {r:.3}, herald probability per mode {p_herald:.2e}");

    for (label, rho) in [
        ("ideal", cat.clone()),
        ("8.3% loss", apply_loss(&cat, 1.0 - 0.083)?),
        ("loss + 3.4% mixing", mix(&apply_loss(&cat, 1.0 - 0.083)?, &sq, 0.034)?),
    ] {
        let fit = best_cat_fidelity(&rho, Parity::Minus)?;
        let p = photon_distribution(&rho);
        println!(
            "{label:>20}: W(0,0) = {:+.4}  even = {:.3}  F_cat = {:.3} at |a|^2 = {:.2}  p0..3 = {:.3?}",
            wigner_origin(&rho),
            even_sum(&rho),
            fit.fidelity,
            fit.alpha_sq(),
            &p[..4]
        );
    }
    Ok(())
}
