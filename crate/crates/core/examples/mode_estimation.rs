//! PCA and ICA recovery of the heralded mode from raw homodyne traces.

use catfilter::mode_est::{ica, pca};
use catfilter::simulate::{estimation_ensemble, heralded_states, ExperimentConfig, PhaseSource};
use catfilter::temporal::inner_product;

fn main() -> catfilter::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "crates/core/configs/paper_xi025.toml".into());
    let cfg = ExperimentConfig::load(&path)?;
    let theory = cfg.theory_mode()?;
    let source = PhaseSource::new(&cfg, &heralded_states(&cfg)?, &theory, 0)?;
    let ens = estimation_ensemble(&source, 10_000)?;
    let truth = theory.cropped(theory.grid.index_of(ens.grid.start).expect("inside"), ens.grid.len)?;

    let p = pca(&ens)?;
    println!("PCA: overlap {:.4}, top eigenvalues {:.3?}", inner_product(&p.mode, &truth)?, &p.eigenvalues[..3]);
    let i = ica(&ens, 20, cfg.seed)?;
    println!("ICA: overlap {:.4}, excess kurtosis {:.3}", inner_product(&i.mode, &truth)?, i.kurtosis);
    Ok(())
}
