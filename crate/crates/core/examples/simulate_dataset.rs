//! A reduced acquisition: traces, heralded events and both quadrature channels.

use catfilter::simulate::{run_experiment, ExperimentConfig, Label};

fn main() -> catfilter::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "crates/core/configs/paper_xi025.toml".into());
    let mut cfg = ExperimentConfig::load(&path)?;
    cfg.acquisition.phases_deg = vec![0.0, 45.0, 90.0, 135.0];
    cfg.acquisition.events_per_phase = 2000;
    cfg.analysis.mode_traces = 5000;

    let run = run_experiment(&cfg)?;
    let ds = &run.dataset;
    let [single, two, fake] = ds.label_counts();
    println!("{} events: {single} single, {two} two-photon, {fake} fake", ds.records.len());
    println!("estimated mode vs theory: {:.4}", ds.meta.mode.overlap_theory);
    println!("LPF readout vs estimated mode: {:.4}", ds.meta.mode.overlap_lpf);
    for (phase, c) in ds.correlations() {
        let xs: Vec<f64> = ds.records.iter().filter(|r| r.phase_deg == phase).map(|r| r.x_post).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        println!("{phase:5.0} deg: var(x_post) = {var:.3}, corr(post, realtime) = {c:.4}");
    }
    let first_fake = ds.records.iter().find(|r| r.label == Label::Fake).map(|r| r.event_id);
    println!("first fake herald: {first_fake:?}");
    Ok(())
}
