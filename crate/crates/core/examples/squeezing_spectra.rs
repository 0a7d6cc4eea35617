//! OPO squeezing spectra and the Gaussian state they leave in a wave packet.

use catfilter::spectra::{effective_params, wavepacket_variances, Quadrature, SqueezingSpectrum};
use catfilter::temporal::{composite_mode, opo_mode, rate_from_fwhm, TimeGrid};

fn main() -> catfilter::Result<()> {
    let grid = TimeGrid::centered(0.1e-9, 16384)?;
    let rates = [rate_from_fwhm(136e6), rate_from_fwhm(18.7e6), rate_from_fwhm(94e6), rate_from_fwhm(130e6)];
    let broad = opo_mode(rates[3], 0.0, &grid)?;
    let narrow = composite_mode(rates, 0.0, &grid)?;

    for xi in [0.11, 0.25, 0.39] {
        let s = SqueezingSpectrum::new(xi, 0.113, 65e6)?;
        let db = |v: f64| 10.0 * v.log10();
        println!(
            "xi = {xi}: S-(0) = {:+.2} dB, S+(0) = {:+.2} dB, S-(65 MHz) = {:+.2} dB",
            db(s.value(0.0, Quadrature::Minus)),
            db(s.value(0.0, Quadrature::Plus)),
            db(s.value(65e6, Quadrature::Minus)),
        );
        let lossless = SqueezingSpectrum::new(xi, 0.0, 65e6)?;
        for (name, mode) in [("OPO mode", &broad), ("filtered", &narrow)] {
            let (r, l) = effective_params(&wavepacket_variances(mode, &lossless)?)?;
            println!("    {name:>9}: r_eff = {r:.3}, equivalent loss {:.1}%", 100.0 * l);
        }
    }
    Ok(())
}
