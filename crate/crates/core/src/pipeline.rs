//! File-level drivers behind the command-line verbs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    best_cat_fidelity, even_sum, photon_distribution, wigner_grid, wigner_origin, DensityMatrix, Parity, WignerGrid,
};
use crate::simulate::{predicted_even_sum, run_experiment, Channel, ExperimentConfig, QuadratureDataset};
use crate::spectra::{Quadrature, SqueezingSpectrum};
use crate::temporal::{composite_mode, filter_mode, opo_mode, TemporalMode};
use crate::tomography::{mle_reconstruct, MleOptions, MleResult};

/// Top-level population tolerated before a reconstructed Wigner surface is refused.
/// Looser than the library default because MLE leaves O(1e-4) noise in every level.
pub const ANALYSIS_TAIL_TOL: f64 = 1e-3;
const MARGINAL_BINS: usize = 81;
const MARGINAL_RANGE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    #[serde(rename = "W00")]
    pub w00: f64,
    pub even_sum: f64,
    #[serde(rename = "best_cat_F")]
    pub best_cat_f: f64,
    pub best_alpha_sq: f64,
    pub photon_probs: Vec<f64>,
}

impl ChannelMetrics {
    pub fn of(rho: &DensityMatrix) -> Result<Self> {
        let cat = best_cat_fidelity(rho, Parity::Minus)?;
        Ok(ChannelMetrics {
            w00: wigner_origin(rho),
            even_sum: even_sum(rho),
            best_cat_f: cat.fidelity,
            best_alpha_sq: cat.alpha_sq(),
            photon_probs: photon_distribution(rho),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCorrelation {
    pub phase_deg: f64,
    pub corr: f64,
}

/// Headline numbers of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub xi: f64,
    pub config_hash: String,
    pub seed: u64,
    pub negativity_post: f64,
    pub negativity_realtime: f64,
    pub even_sum_measured: f64,
    pub even_sum_predicted: f64,
    #[serde(rename = "best_cat_F")]
    pub best_cat_f: f64,
    pub best_alpha_sq: f64,
    pub mode_overlap_theory: f64,
    pub lpf_overlap: f64,
    pub correlations: Vec<PhaseCorrelation>,
    pub config: ExperimentConfig,
}

impl ScenarioReport {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            self.negativity_post,
            self.negativity_realtime,
            self.even_sum_measured,
            self.even_sum_predicted,
            self.best_cat_f,
            self.best_alpha_sq,
            self.mode_overlap_theory,
            self.lpf_overlap,
        ];
        if scalars.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema(format!("{}: non-finite metric", self.name)));
        }
        if self.correlations.iter().any(|c| !(-1.0..=1.0).contains(&c.corr)) {
            return Err(Error::Schema(format!("{}: correlation outside [-1, 1]", self.name)));
        }
        Ok(())
    }

    pub fn min_correlation(&self) -> f64 {
        self.correlations.iter().map(|c| c.corr).fold(f64::INFINITY, f64::min)
    }

    pub fn gap(&self) -> f64 {
        self.negativity_realtime - self.negativity_post
    }
}

/// Tomography of both channels of one dataset.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub post: MleResult,
    pub realtime: MleResult,
    pub report: ScenarioReport,
}

impl Analysis {
    pub fn channel(&self, ch: Channel) -> &MleResult {
        match ch {
            Channel::Post => &self.post,
            Channel::Realtime => &self.realtime,
        }
    }
}

pub fn mle_options(cfg: &ExperimentConfig) -> MleOptions {
    MleOptions { cutoff: cfg.analysis.tomography_cutoff, max_iter: cfg.analysis.max_iter, tol: cfg.analysis.tol }
}

pub fn analyze_dataset(ds: &QuadratureDataset) -> Result<Analysis> {
    let cfg = &ds.meta.config;
    let opts = mle_options(cfg);
    let post = mle_reconstruct(&ds.phase_samples(Channel::Post), &opts)?;
    let realtime = mle_reconstruct(&ds.phase_samples(Channel::Realtime), &opts)?;
    let cat = best_cat_fidelity(&post.rho, Parity::Minus)?;
    let report = ScenarioReport {
        name: cfg.name.clone(),
        xi: cfg.pump.xi,
        config_hash: ds.meta.config_hash.clone(),
        seed: ds.meta.seed,
        negativity_post: wigner_origin(&post.rho),
        negativity_realtime: wigner_origin(&realtime.rho),
        even_sum_measured: even_sum(&post.rho),
        even_sum_predicted: predicted_even_sum(cfg)?,
        best_cat_f: cat.fidelity,
        best_alpha_sq: cat.alpha_sq(),
        mode_overlap_theory: ds.meta.mode.overlap_theory,
        lpf_overlap: ds.meta.mode.overlap_lpf,
        correlations: ds
            .correlations()
            .into_iter()
            .map(|(phase_deg, corr)| PhaseCorrelation { phase_deg, corr })
            .collect(),
        config: cfg.clone(),
    };
    report.validate()?;
    Ok(Analysis { post, realtime, report })
}

fn channel_name(ch: Channel) -> &'static str {
    match ch {
        Channel::Post => "post",
        Channel::Realtime => "realtime",
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:.9e}")))?;
    }
    w.flush()?;
    Ok(())
}

fn write_mode_csv(path: &Path, modes: &[(&str, &TemporalMode)]) -> Result<()> {
    let grid = modes[0].1.grid;
    let mut header = vec!["t_ns"];
    header.extend(modes.iter().map(|(n, _)| *n));
    write_rows(
        path,
        &header,
        (0..grid.len).map(|k| {
            let mut row = vec![grid.time(k) * 1e9];
            row.extend(modes.iter().map(|(_, m)| m.values[k]));
            row
        }),
    )
}

/// Wigner surface as long-format rows (x, p, W).
pub fn write_wigner_csv(path: &Path, rho: &DensityMatrix, grid: &WignerGrid) -> Result<()> {
    let w = wigner_grid(rho, grid, ANALYSIS_TAIL_TOL)?;
    let axis = grid.axis();
    write_rows(
        path,
        &["x", "p", "W"],
        axis.iter().enumerate().flat_map(|(i, &x)| {
            let w = &w;
            axis.iter().enumerate().map(move |(j, &p)| vec![x, p, w[i][j]])
        }),
    )
}

/// Runs one acquisition and writes `<name>.csv`, its JSON sidecar and the mode curves.
pub fn cmd_simulate(config: &Path, seed: Option<u64>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let run = run_experiment(&cfg)?;
    fs::create_dir_all(out_dir)?;
    run.dataset.save(out_dir, &cfg.name)?;
    let mode_csv = out_dir.join(format!("{}_mode.csv", cfg.name));
    write_mode_csv(
        &mode_csv,
        &[("estimated", &run.estimated_mode), ("theory", &run.theory_mode), ("lpf", &run.readout_mode)],
    )?;
    let overlap = out_dir.join(format!("{}_overlap.json", cfg.name));
    write_json(&overlap, &run.dataset.meta.mode)?;
    Ok(vec![out_dir.join(format!("{}.csv", cfg.name)), out_dir.join(format!("{}.json", cfg.name)), mode_csv, overlap])
}

/// Reconstructs both channels and writes metrics, density matrices, Wigner
/// surfaces, marginal histograms and the scenario report fragment.
pub fn cmd_analyze(dataset: &Path, channel: Option<Channel>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let ds = QuadratureDataset::load(dataset)?;
    let analysis = analyze_dataset(&ds)?;
    let name = &ds.meta.config.name;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let channels = match channel {
        Some(c) => vec![c],
        None => vec![Channel::Post, Channel::Realtime],
    };
    for ch in channels {
        let rho = &analysis.channel(ch).rho;
        let stem = format!("{name}_{}", channel_name(ch));
        let metrics = out_dir.join(format!("{stem}_metrics.json"));
        write_json(&metrics, &ChannelMetrics::of(rho)?)?;
        let density = out_dir.join(format!("{stem}_density.json"));
        write_json(&density, &rho.to_json_value())?;
        let wigner = out_dir.join(format!("{stem}_wigner.csv"));
        write_wigner_csv(&wigner, rho, &WignerGrid::default())?;
        written.extend([metrics, density, wigner]);
    }
    let marginals = out_dir.join(format!("{name}_marginals.csv"));
    write_marginals(&marginals, &ds)?;
    let report = out_dir.join(format!("{name}_report.json"));
    write_json(&report, &analysis.report)?;
    written.extend([marginals, report]);
    Ok(written)
}

/// Histogram densities of both channels at the anti-squeezed (0°) and squeezed (90°) phases.
fn write_marginals(path: &Path, ds: &QuadratureDataset) -> Result<()> {
    let pick = |target: f64| {
        ds.phases_deg()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .map(|(i, _)| i)
            .expect("dataset has phases")
    };
    let width = 2.0 * MARGINAL_RANGE / MARGINAL_BINS as f64;
    let mut cols = Vec::new();
    for p in [pick(0.0), pick(90.0)] {
        for ch in [Channel::Post, Channel::Realtime] {
            let xs = &ds.phase_samples(ch)[p].x;
            let mut h = vec![0.0; MARGINAL_BINS];
            for x in xs {
                let b = ((x + MARGINAL_RANGE) / width).floor();
                if b >= 0.0 && (b as usize) < MARGINAL_BINS {
                    h[b as usize] += 1.0 / (xs.len() as f64 * width);
                }
            }
            cols.push(h);
        }
    }
    write_rows(
        path,
        &["x", "post_0", "realtime_0", "post_90", "realtime_90"],
        (0..MARGINAL_BINS).map(|b| {
            let mut row = vec![-MARGINAL_RANGE + (b as f64 + 0.5) * width];
            row.extend(cols.iter().map(|c| c[b]));
            row
        }),
    )
}

/// Merged report over all fragments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenarios: Vec<ScenarioReport>,
}

pub fn merge_fragments(fragments: Vec<ScenarioReport>) -> Result<Report> {
    if fragments.is_empty() {
        return Err(Error::InvalidArgument("no report fragments given".into()));
    }
    let mut scenarios: Vec<ScenarioReport> = Vec::new();
    for f in fragments {
        f.validate()?;
        if let Some(prev) = scenarios.iter().find(|s| s.name == f.name) {
            if prev.config_hash != f.config_hash {
                return Err(Error::Config(format!(
                    "scenario {} appears with config hashes {} and {}",
                    f.name, prev.config_hash, f.config_hash
                )));
            }
            continue;
        }
        scenarios.push(f);
    }
    scenarios.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    Ok(Report { scenarios })
}

pub fn summary_table(report: &Report) -> String {
    let mut s = String::from(
        "| scenario | xi | W00 post | W00 realtime | gap | even sum | predicted | cat F | alpha^2 | min corr |\n\
         |---|---|---|---|---|---|---|---|---|---|\n",
    );
    for r in &report.scenarios {
        s += &format!(
            "| {} | {:.2} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {:.2} | {:.4} |\n",
            r.name,
            r.xi,
            r.negativity_post,
            r.negativity_realtime,
            r.gap(),
            r.even_sum_measured,
            r.even_sum_predicted,
            r.best_cat_f,
            r.best_alpha_sq,
            r.min_correlation()
        );
    }
    s
}

/// Merges fragments into `report.json` and `summary.md`, plus mode, spectrum
/// and correlation CSVs for plotting.
pub fn cmd_report(fragments: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let parsed = fragments
        .iter()
        .map(|p| -> Result<ScenarioReport> {
            serde_json::from_str(&fs::read_to_string(p)?)
                .map_err(|e| Error::Schema(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = merge_fragments(parsed)?;
    fs::create_dir_all(out_dir)?;
    let json = out_dir.join("report.json");
    write_json(&json, &report)?;
    let md = out_dir.join("summary.md");
    fs::File::create(&md)?.write_all(summary_table(&report).as_bytes())?;

    let first = &report.scenarios[0].config;
    let modes = out_dir.join("modes.csv");
    write_modes(&modes, first)?;
    let spectra = out_dir.join("spectra.csv");
    let specs = report.scenarios.iter().map(|s| s.config.background_spectrum()).collect::<Result<Vec<_>>>()?;
    write_spectra(&spectra, &specs, &report.scenarios.iter().map(|s| s.name.as_str()).collect::<Vec<_>>())?;
    let corr = out_dir.join("correlations.csv");
    let mut header = vec!["phase_deg".to_string()];
    header.extend(report.scenarios.iter().map(|s| s.name.clone()));
    let mut w = csv::Writer::from_path(&corr)?;
    w.write_record(&header)?;
    let n = report.scenarios.iter().map(|s| s.correlations.len()).max().unwrap_or(0);
    for k in 0..n {
        let phase = report.scenarios.iter().find_map(|s| s.correlations.get(k)).map(|c| c.phase_deg).unwrap_or(f64::NAN);
        let mut row = vec![format!("{phase}")];
        row.extend(
            report.scenarios.iter().map(|s| s.correlations.get(k).map(|c| format!("{:.6}", c.corr)).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(vec![json, md, modes, spectra, corr])
}

fn write_modes(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let grid = cfg.grid()?;
    let r = cfg.rates();
    let opo = opo_mode(r[3], 0.0, &grid)?;
    let fc: Vec<TemporalMode> = (0..3).map(|i| filter_mode(r[i], 0.0, &grid)).collect::<Result<_>>()?;
    let comp = composite_mode(r, 0.0, &grid)?;
    write_mode_csv(
        path,
        &[("opo", &opo), ("filter1", &fc[0]), ("filter2", &fc[1]), ("filter3", &fc[2]), ("composite", &comp)],
    )
}

fn write_spectra(path: &Path, specs: &[SqueezingSpectrum], names: &[&str]) -> Result<()> {
    let mut header = vec!["f_mhz".to_string()];
    for n in names {
        header.push(format!("{n}_minus"));
        header.push(format!("{n}_plus"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header,
        (0..=400).map(|k| {
            let f = k as f64 * 0.5e6;
            let mut row = vec![f * 1e-6];
            for s in specs {
                row.push(s.value(f, Quadrature::Minus));
                row.push(s.value(f, Quadrature::Plus));
            }
            row
        }),
    )
}

/// Analytic single-cavity and composite modes of a config.
pub fn cmd_modes(config: &Path, out_dir: &Path) -> Result<PathBuf> {
    let cfg = ExperimentConfig::load(config)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}_modes.csv", cfg.name));
    write_modes(&path, &cfg)?;
    Ok(path)
}

/// Squeezing spectra of a config: itemized budget plus tap, and the full model background.
pub fn cmd_spectra(config: &Path, out_dir: &Path) -> Result<PathBuf> {
    let cfg = ExperimentConfig::load(config)?;
    let itemized = SqueezingSpectrum::new(
        cfg.pump.xi,
        (cfg.losses.itemized() + 1.0 - cfg.pump.tap_reflectivity).min(1.0),
        cfg.f_hwhm(),
    )?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}_spectra.csv", cfg.name));
    write_spectra(&path, &[itemized, cfg.background_spectrum()?], &["itemized", "model"])?;
    Ok(path)
}
