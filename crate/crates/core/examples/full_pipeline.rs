//! Simulate, reconstruct and summarize one bundled scenario.
//!
//! Runs the full 37 x 10,000 acquisition, so build with `--release`.

use catfilter::pipeline::{analyze_dataset, merge_fragments, summary_table};
use catfilter::simulate::{run_experiment, ExperimentConfig};

fn main() -> catfilter::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "crates/core/configs/paper_xi025.toml".into());
    let cfg = ExperimentConfig::load(&path)?;
    let run = run_experiment(&cfg)?;
    let analysis = analyze_dataset(&run.dataset)?;
    println!("RrR iterations: post {}, realtime {}", analysis.post.iterations, analysis.realtime.iterations);
    print!("{}", summary_table(&merge_fragments(vec![analysis.report])?));
    Ok(())
}
