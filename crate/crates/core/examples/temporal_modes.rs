//! Heralded temporal modes: the bare OPO mode versus the filtered cascade.

use catfilter::temporal::{composite_mode, inner_product, opo_mode, rate_from_fwhm, TimeGrid};

fn main() -> catfilter::Result<()> {
    let grid = TimeGrid::default();
    let rates = [rate_from_fwhm(136e6), rate_from_fwhm(18.7e6), rate_from_fwhm(94e6), rate_from_fwhm(130e6)];
    let opo = opo_mode(rates[3], 0.0, &grid)?;
    let filtered = composite_mode(rates, 0.0, &grid)?;

    let (k, peak) = filtered.peak();
    println!("filtered mode peaks at {:.1} ns with {peak:.3e}", grid.time(k) * 1e9);
    println!("overlap with the unfiltered OPO mode: {:.3}", inner_product(&opo, &filtered)?);

    let energy_after: f64 = filtered
        .values
        .iter()
        .enumerate()
        .filter(|(k, _)| grid.time(*k) > 0.0)
        .map(|(_, v)| v * v * grid.dt)
        .sum();
    println!("energy after the herald: {:.2}%", 100.0 * energy_after);

    println!("\n  t (ns)   opo       filtered");
    for t_ns in [-100, -60, -30, -15, -5, 0, 5, 15] {
        let k = grid.index_of(t_ns as f64 * 1e-9).expect("inside window");
        println!("{t_ns:8} {:9.3e} {:9.3e}", opo.values[k], filtered.values[k]);
    }
    Ok(())
}
