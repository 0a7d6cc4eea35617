//! CW homodyne trace synthesis with heralded events, and the experiment runner.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock::{
    apply_loss, apply_loss_one_photon_approx, even_sum, mix, photon_subtract, quadrature_moments, squeezed_vacuum,
    wigner_origin, DensityMatrix, GaussianInModeState,
};
use crate::mode_est::{ica_mode, pca_mode, TraceEnsemble};
use crate::spectra::{dc_squeezing_parameter, wavepacket_variances, SqueezingSpectrum};
use crate::tomography::PhaseSamples;
use crate::temporal::{
    composite_mode, design_lpf, inner_product, rate_from_fwhm, FilterCoefficients, TemporalMode, TimeGrid,
};

/// Span recorded before and after t₀ for mode estimation (200 ns in total).
pub const ESTIMATION_BEFORE: f64 = 160e-9;
pub const ESTIMATION_AFTER: f64 = 40e-9;

fn default_phases() -> Vec<f64> {
    (0..37).map(|k| 5.0 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cavities {
    pub opo_fwhm_mhz: f64,
    /// Filter cavity linewidths (FWHM, MHz) in optical order.
    pub filter_fwhm_mhz: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pump {
    pub xi: f64,
    pub tap_reflectivity: f64,
}

/// Itemized loss fractions, combined additively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Losses {
    pub propagation: f64,
    pub photodiode: f64,
    pub circuit_noise: f64,
    pub visibility: f64,
    pub opo_escape: f64,
    /// Loss not covered by the itemized budget.
    #[serde(default)]
    pub unaccounted: f64,
}

impl Losses {
    fn items(&self) -> [(&'static str, f64); 6] {
        [
            ("propagation", self.propagation),
            ("photodiode", self.photodiode),
            ("circuit_noise", self.circuit_noise),
            ("visibility", self.visibility),
            ("opo_escape", self.opo_escape),
            ("unaccounted", self.unaccounted),
        ]
    }

    /// Sum of the itemized (measured) losses.
    pub fn itemized(&self) -> f64 {
        self.items().iter().filter(|(n, _)| *n != "unaccounted").map(|(_, v)| v).sum()
    }

    pub fn total(&self) -> f64 {
        self.itemized() + self.unaccounted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mixedness {
    /// Fraction of heralds that are fake counts.
    pub fake: f64,
    /// Fraction of heralds caused by two subtracted photons.
    pub two_photon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Acquisition {
    #[serde(default = "default_phases")]
    pub phases_deg: Vec<f64>,
    pub events_per_phase: usize,
    pub sample_rate_hz: f64,
    pub window_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpfKind {
    /// Fixed time constants and readout delay from the config.
    AsBuilt,
    /// Designed on the estimated mode at run time.
    Matched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpfConfig {
    pub kind: LpfKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_ns: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_ns: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Pca,
    Ica,
    /// Use the analytic cascade mode directly.
    Theory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub estimator: Estimator,
    pub mode_traces: usize,
    pub ica_components: usize,
    pub state_cutoff: usize,
    pub tomography_cutoff: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            estimator: Estimator::Pca,
            mode_traces: 10_000,
            ica_components: crate::mode_est::ICA_DEFAULT_COMPONENTS,
            state_cutoff: crate::fock::DEFAULT_CUTOFF,
            tomography_cutoff: 15,
            max_iter: 2000,
            tol: 1e-8,
        }
    }
}

/// Complete description of one simulated acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub cavities: Cavities,
    pub pump: Pump,
    pub losses: Losses,
    pub mixedness: Mixedness,
    pub acquisition: Acquisition,
    pub lpf: LpfConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.as_ref().display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in self.losses.items() {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("losses.{name} = {v} outside [0, 1]"));
            }
        }
        if self.losses.total() > 1.0 {
            return bad(format!("total loss {} exceeds 1", self.losses.total()));
        }
        let m = &self.mixedness;
        if !(0.0..=1.0).contains(&m.fake) || !(0.0..=1.0).contains(&m.two_photon) || m.fake + m.two_photon > 1.0 {
            return bad(format!("mixedness fractions {} + {} must lie in [0, 1]", m.fake, m.two_photon));
        }
        if !(0.0..1.0).contains(&self.pump.xi) {
            return bad(format!("pump.xi = {} must lie in [0, 1)", self.pump.xi));
        }
        let r = self.pump.tap_reflectivity;
        if !(r > 0.0 && r < 1.0) {
            return bad(format!("pump.tap_reflectivity = {r} must lie in (0, 1)"));
        }
        let c = &self.cavities;
        if !(c.opo_fwhm_mhz > 0.0) || c.filter_fwhm_mhz.iter().any(|f| !(*f > 0.0)) {
            return bad("cavity linewidths must be positive".into());
        }
        let a = &self.acquisition;
        if a.events_per_phase == 0 {
            return bad("acquisition.events_per_phase must be positive".into());
        }
        if a.phases_deg.is_empty() || a.phases_deg.iter().any(|p| !p.is_finite()) {
            return bad("acquisition.phases_deg must be a non-empty list of angles".into());
        }
        if !(a.sample_rate_hz >= 10.0 * self.f_hwhm()) {
            return bad(format!(
                "acquisition.sample_rate_hz = {} is below 10x the OPO half bandwidth",
                a.sample_rate_hz
            ));
        }
        if a.window_samples < 256 {
            return bad("acquisition.window_samples must be at least 256".into());
        }
        if self.lpf.kind == LpfKind::AsBuilt && self.lpf.tau_ns.is_none() {
            return bad("lpf.kind = \"as_built\" requires lpf.tau_ns".into());
        }
        let an = &self.analysis;
        if an.estimator != Estimator::Theory && an.mode_traces < crate::mode_est::PCA_MIN_TRACES {
            return bad(format!("analysis.mode_traces must be at least {}", crate::mode_est::PCA_MIN_TRACES));
        }
        if an.ica_components == 0 || an.ica_components > crate::mode_est::ICA_MAX_COMPONENTS {
            return bad("analysis.ica_components must be in 1..=50".into());
        }
        if an.state_cutoff < 10 || an.tomography_cutoff < 2 {
            return bad("analysis cutoffs too small".into());
        }
        Ok(())
    }

    /// OPO half bandwidth in Hz.
    pub fn f_hwhm(&self) -> f64 {
        0.5 * self.cavities.opo_fwhm_mhz * 1e6
    }

    pub fn rates(&self) -> [f64; 4] {
        let f = self.cavities.filter_fwhm_mhz;
        [
            rate_from_fwhm(f[0] * 1e6),
            rate_from_fwhm(f[1] * 1e6),
            rate_from_fwhm(f[2] * 1e6),
            rate_from_fwhm(self.cavities.opo_fwhm_mhz * 1e6),
        ]
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::centered(1.0 / self.acquisition.sample_rate_hz, self.acquisition.window_samples)
    }

    /// Analytic heralded mode with t₀ = 0.
    pub fn theory_mode(&self) -> Result<TemporalMode> {
        composite_mode(self.rates(), 0.0, &self.grid()?)
    }

    /// Spectrum of the unheralded light reaching the homodyne detector.
    pub fn background_spectrum(&self) -> Result<SqueezingSpectrum> {
        let eta = self.pump.tap_reflectivity * (1.0 - self.losses.total());
        SqueezingSpectrum::new(self.pump.xi, 1.0 - eta, self.f_hwhm())
    }

    pub fn phases_rad(&self) -> Vec<f64> {
        self.acquisition.phases_deg.iter().map(|d| d.to_radians()).collect()
    }
}

/// Heralded states per event label, as they reach the detector.
#[derive(Debug, Clone)]
pub struct HeraldedStates {
    /// In-mode Gaussian state of the squeezed light before the tap.
    pub ancestor: GaussianInModeState,
    pub single: DensityMatrix,
    pub two_photon: DensityMatrix,
    pub fake: DensityMatrix,
}

pub fn heralded_states(cfg: &ExperimentConfig) -> Result<HeraldedStates> {
    let lossless = SqueezingSpectrum::new(cfg.pump.xi, 0.0, cfg.f_hwhm())?;
    let ancestor = wavepacket_variances(&cfg.theory_mode()?, &lossless)?;
    let cutoff = cfg.analysis.state_cutoff;
    let rho = squeezed_vacuum(&ancestor, cutoff)?;
    let r = cfg.pump.tap_reflectivity;
    let eta = 1.0 - cfg.losses.total();
    let (single, _) = photon_subtract(&rho, r, 1)?;
    let (two, _) = photon_subtract(&rho, r, 2)?;
    let fake = apply_loss(&rho, r)?;
    Ok(HeraldedStates {
        ancestor,
        single: apply_loss(&single, eta)?,
        two_photon: apply_loss(&two, eta)?,
        fake: apply_loss(&fake, eta)?,
    })
}

/// Label-weighted mixture of the heralded states: the state a perfect
/// tomography of the post-processed channel would return.
pub fn model_state(cfg: &ExperimentConfig) -> Result<DensityMatrix> {
    let s = heralded_states(cfg)?;
    let m = &cfg.mixedness;
    let with_two = mix(&s.single, &s.two_photon, m.two_photon / (1.0 - m.fake).max(1e-300))?;
    mix(&with_two, &s.fake, m.fake)
}

/// Even-photon population predicted from the itemized budget: ideal
/// single-photon subtraction from the DC squeezed vacuum, one-photon loss
/// approximation with the itemized loss, then mixing with the squeezed vacuum
/// at the total mixedness.
pub fn predicted_even_sum(cfg: &ExperimentConfig) -> Result<f64> {
    let r = dc_squeezing_parameter(cfg.pump.xi);
    let anc = squeezed_vacuum(&GaussianInModeState::from_effective(r, 0.0)?, cfg.analysis.state_cutoff)?;
    let (single, _) = photon_subtract(&anc, cfg.pump.tap_reflectivity, 1)?;
    let lossy = apply_loss_one_photon_approx(&single, cfg.losses.itemized())?;
    let w = cfg.mixedness.fake + cfg.mixedness.two_photon;
    Ok(even_sum(&mix(&lossy, &anc, w)?))
}

/// Unaccounted loss that puts the model state's W(0,0) at `target`.
pub fn calibrate_unaccounted_loss(cfg: &ExperimentConfig, target: f64) -> Result<f64> {
    let w_at = |u: f64| -> Result<f64> {
        let mut c = cfg.clone();
        c.losses.unaccounted = u;
        Ok(wigner_origin(&model_state(&c)?))
    };
    let (mut lo, mut hi) = (0.0, 1.0 - cfg.losses.itemized() - 1e-9);
    let (w_lo, w_hi) = (w_at(lo)?, w_at(hi)?);
    if (w_lo - target) * (w_hi - target) > 0.0 {
        return Err(Error::ModelViolation(format!(
            "W(0,0) target {target} outside the reachable range [{w_lo:.4}, {w_hi:.4}]"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (w_at(mid)? - target) * (w_lo - target) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Frequency-domain colouring of white noise to the quadrature spectrum at one LO phase.
pub struct BackgroundSynth {
    amp: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    sigma: f64,
}

impl BackgroundSynth {
    pub fn new(s: &SqueezingSpectrum, theta: f64, len: usize, fs: f64) -> Result<Self> {
        if fs < 10.0 * s.f_hwhm {
            return Err(Error::InvalidArgument(format!(
                "sample rate {fs:.3e} Hz below 10x the OPO half bandwidth"
            )));
        }
        if fs / len as f64 > s.f_hwhm / 10.0 {
            return Err(Error::GridTooShort(format!(
                "{len} samples at {fs:.3e} Hz cannot resolve f_HWHM/10"
            )));
        }
        let amp = (0..len)
            .map(|j| {
                let jj = if j <= len / 2 { j as f64 } else { j as f64 - len as f64 };
                s.at_phase((jj * fs / len as f64).abs(), theta).sqrt() / len as f64
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(BackgroundSynth {
            amp,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
            // white variance 1/(2dt) gives the vacuum variance 1/2 in any unit-norm mode
            sigma: (0.5 * fs).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.amp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amp.is_empty()
    }

    /// Writes one stationary realization into `out`, using `buf` as workspace.
    pub fn generate<R: Rng>(&self, rng: &mut R, buf: &mut Vec<Complex64>, out: &mut Vec<f64>) {
        let n = self.len();
        buf.clear();
        buf.extend((0..n).map(|_| Complex64::new(self.sigma * rng.sample::<f64, _>(StandardNormal), 0.0)));
        self.fwd.process(buf);
        for (c, a) in buf.iter_mut().zip(&self.amp) {
            *c *= a;
        }
        self.inv.process(buf);
        out.clear();
        out.extend(buf.iter().map(|c| c.re));
    }
}

/// One stationary squeezed-vacuum trace of `len` samples at phase `theta`.
pub fn background_trace(s: &SqueezingSpectrum, theta: f64, len: usize, fs: f64, seed: u64) -> Result<Vec<f64>> {
    let synth = BackgroundSynth::new(s, theta, len, fs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = Vec::new();
    let mut out = Vec::new();
    synth.generate(&mut rng, &mut buf, &mut out);
    Ok(out)
}

/// ⟨trace, f⟩ = Σ trace_k f_k dt.
pub fn project(trace: &[f64], mode: &TemporalMode) -> f64 {
    trace.iter().zip(&mode.values).map(|(a, b)| a * b).sum::<f64>() * mode.grid.dt
}

/// Replaces the content of `trace` in `mode` by `x_h`.
pub fn embed_event(trace: &mut [f64], mode: &TemporalMode, x_h: f64) -> Result<()> {
    if trace.len() != mode.grid.len {
        return Err(Error::DimensionMismatch(trace.len(), mode.grid.len));
    }
    check_edges(mode)?;
    let shift = x_h - project(trace, mode);
    for (t, f) in trace.iter_mut().zip(&mode.values) {
        *t += shift * f;
    }
    Ok(())
}

fn check_edges(mode: &TemporalMode) -> Result<()> {
    let g = &mode.grid;
    if let Some(d) = mode.descriptor {
        let slowest = d.gammas.iter().copied().fold(f64::INFINITY, f64::min);
        if mode.t0 - 5.0 / slowest < g.start || mode.t0 + 5.0 / d.gammas[3] > g.end() {
            return Err(Error::EdgeViolation(format!(
                "event at {:.3e} s lies within 5 decay constants of the window edge",
                mode.t0
            )));
        }
        return Ok(());
    }
    let (_, peak) = mode.peak();
    let n = mode.values.len();
    let edge = mode.values[0].abs().max(mode.values[n - 1].abs());
    if edge > 1e-3 * peak.abs() {
        return Err(Error::EdgeViolation(format!("mode is {:.2e} of its peak at the window edge", edge / peak.abs())));
    }
    Ok(())
}

/// Inverse-CDF sampler for the quadrature marginal of a state at one LO phase.
#[derive(Debug, Clone)]
pub struct QuadratureSampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

const SAMPLER_POINTS: usize = 4001;

impl QuadratureSampler {
    pub fn new(rho: &DensityMatrix, theta: f64) -> Result<Self> {
        let (mean, var) = quadrature_moments(rho, theta);
        let half = 10.0 * var.max(1e-6).sqrt();
        let xs: Vec<f64> = (0..SAMPLER_POINTS)
            .map(|k| mean - half + 2.0 * half * k as f64 / (SAMPLER_POINTS - 1) as f64)
            .collect();
        let p = crate::fock::quadrature_marginal(rho, theta, &xs)?;
        let mut cdf = Vec::with_capacity(xs.len());
        cdf.push(0.0);
        for k in 1..xs.len() {
            cdf.push(cdf[k - 1] + 0.5 * (p[k] + p[k - 1]) * (xs[k] - xs[k - 1]));
        }
        let total = *cdf.last().expect("non-empty grid");
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(QuadratureSampler { xs, cdf })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[k - 1] + w * (self.xs[k] - self.xs[k - 1])
    }
}

pub fn sample_heralded_quadrature<R: Rng>(rho: &DensityMatrix, theta: f64, rng: &mut R) -> Result<f64> {
    Ok(QuadratureSampler::new(rho, theta)?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "single")]
    Single,
    #[serde(rename = "two-photon")]
    TwoPhoton,
    #[serde(rename = "fake")]
    Fake,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub phase_deg: f64,
    pub event_id: usize,
    pub x_post: f64,
    pub x_realtime: f64,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Post,
    Realtime,
}

/// Mode estimation and filter summary for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub estimator: Estimator,
    /// ⟨estimated mode, analytic mode⟩.
    pub overlap_theory: f64,
    /// ⟨LPF readout mode, estimated mode⟩.
    pub overlap_lpf: f64,
    pub lpf_tau_ns: [f64; 3],
    pub lpf_delay_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub mode: ModeReport,
}

/// Per-phase, per-event quadratures from both channels.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDataset {
    pub meta: DatasetMeta,
    pub records: Vec<EventRecord>,
}

impl QuadratureDataset {
    pub fn phases_deg(&self) -> &[f64] {
        &self.meta.config.acquisition.phases_deg
    }

    pub fn events_per_phase(&self) -> usize {
        self.meta.config.acquisition.events_per_phase
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.phases_deg().len() * self.events_per_phase();
        if self.records.len() != n {
            return Err(Error::Schema(format!("expected {n} records, found {}", self.records.len())));
        }
        for (i, r) in self.records.iter().enumerate() {
            let p = i / self.events_per_phase();
            if r.event_id != i % self.events_per_phase() || (r.phase_deg - self.phases_deg()[p]).abs() > 1e-9 {
                return Err(Error::Schema(format!("record {i} out of order")));
            }
        }
        Ok(())
    }

    fn phase_records(&self, p: usize) -> &[EventRecord] {
        let n = self.events_per_phase();
        &self.records[p * n..(p + 1) * n]
    }

    pub fn phase_samples(&self, channel: Channel) -> Vec<PhaseSamples> {
        (0..self.phases_deg().len())
            .map(|p| PhaseSamples {
                theta: self.phases_deg()[p].to_radians(),
                x: self
                    .phase_records(p)
                    .iter()
                    .map(|r| match channel {
                        Channel::Post => r.x_post,
                        Channel::Realtime => r.x_realtime,
                    })
                    .collect(),
            })
            .collect()
    }

    /// Pearson correlation of the two channels at each phase.
    pub fn correlations(&self) -> Vec<(f64, f64)> {
        (0..self.phases_deg().len())
            .map(|p| {
                let recs = self.phase_records(p);
                let a: Vec<f64> = recs.iter().map(|r| r.x_post).collect();
                let b: Vec<f64> = recs.iter().map(|r| r.x_realtime).collect();
                (self.phases_deg()[p], pearson(&a, &b))
            })
            .collect()
    }

    pub fn label_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for r in &self.records {
            c[match r.label {
                Label::Single => 0,
                Label::TwoPhoton => 1,
                Label::Fake => 2,
            }] += 1;
        }
        c
    }

    /// Writes `<stem>.csv` and the `<stem>.json` sidecar.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    /// Reads a dataset from its CSV path; the sidecar is the same path with `.json`.
    pub fn load(csv_path: impl AsRef<Path>) -> Result<Self> {
        let csv_path = csv_path.as_ref();
        let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(csv_path.with_extension("json"))?)?;
        let mut rdr = csv::Reader::from_path(csv_path)?;
        let headers = rdr.headers()?.clone();
        let want = ["phase_deg", "event_id", "x_post", "x_realtime", "label"];
        if headers.iter().collect::<Vec<_>>() != want {
            return Err(Error::Schema(format!("unexpected CSV header {:?}", headers)));
        }
        let records = rdr.deserialize().collect::<std::result::Result<Vec<EventRecord>, _>>()?;
        let ds = QuadratureDataset { meta, records };
        ds.validate()?;
        Ok(ds)
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Independent RNG stream for one event.
pub fn event_rng(seed: u64, phase: usize, event: usize) -> ChaCha8Rng {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in [phase as u64, event as u64] {
        h = splitmix(h ^ splitmix(v.wrapping_add(0xD1B5_4A32_D192_ED03)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything produced by one run besides the dataset itself.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub dataset: QuadratureDataset,
    pub theory_mode: TemporalMode,
    pub estimated_mode: TemporalMode,
    pub readout_mode: TemporalMode,
    pub lpf: FilterCoefficients,
}

/// Trace generator for one LO phase of an acquisition.
pub struct PhaseSource {
    seed: u64,
    phase_index: usize,
    fractions: (f64, f64),
    samplers: [QuadratureSampler; 3],
    synth: BackgroundSynth,
    mode: TemporalMode,
}

impl PhaseSource {
    pub fn new(cfg: &ExperimentConfig, states: &HeraldedStates, mode: &TemporalMode, phase_index: usize) -> Result<Self> {
        let theta = cfg
            .phases_rad()
            .get(phase_index)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no phase with index {phase_index}")))?;
        Ok(PhaseSource {
            seed: cfg.seed,
            phase_index,
            fractions: (cfg.mixedness.fake, cfg.mixedness.two_photon),
            samplers: [
                QuadratureSampler::new(&states.single, theta)?,
                QuadratureSampler::new(&states.two_photon, theta)?,
                QuadratureSampler::new(&states.fake, theta)?,
            ],
            synth: BackgroundSynth::new(&cfg.background_spectrum()?, theta, mode.grid.len, 1.0 / mode.grid.dt)?,
            mode: mode.clone(),
        })
    }

    /// Writes the trace of `event` into `out`; `buf` is FFT workspace.
    pub fn trace(&self, event: usize, buf: &mut Vec<Complex64>, out: &mut Vec<f64>) -> Result<Label> {
        let mut rng = event_rng(self.seed, self.phase_index, event);
        let u: f64 = rng.random();
        let (fake, two) = self.fractions;
        let (label, sampler) = if u < fake {
            (Label::Fake, &self.samplers[2])
        } else if u < fake + two {
            (Label::TwoPhoton, &self.samplers[1])
        } else {
            (Label::Single, &self.samplers[0])
        };
        let x_h = sampler.sample(&mut rng);
        self.synth.generate(&mut rng, buf, out);
        embed_event(out, &self.mode, x_h)?;
        Ok(label)
    }

    /// Traces of events `0..count` cropped to samples `range`.
    pub fn cropped_traces(&self, count: usize, range: std::ops::Range<usize>) -> Result<Vec<Vec<f64>>> {
        (0..count)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(buf, trace), e| {
                    self.trace(e, buf, trace)?;
                    Ok(trace[range.clone()].to_vec())
                },
            )
            .collect()
    }
}

/// Index of the LO phase closest to the anti-squeezed quadrature.
fn widest_phase(phases_deg: &[f64]) -> usize {
    let dist = |d: f64| {
        let m = d.rem_euclid(180.0);
        m.min(180.0 - m)
    };
    (0..phases_deg.len())
        .min_by(|&a, &b| dist(phases_deg[a]).total_cmp(&dist(phases_deg[b])))
        .expect("non-empty phase list")
}

/// Simulates the full acquisition described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let theory = cfg.theory_mode()?;
    let states = heralded_states(cfg)?;
    let phases = cfg.phases_rad();
    let n_events = cfg.acquisition.events_per_phase;

    let sources: Vec<PhaseSource> =
        (0..phases.len()).map(|p| PhaseSource::new(cfg, &states, &theory, p)).collect::<Result<_>>()?;
    let estimated = match cfg.analysis.estimator {
        Estimator::Theory => theory.clone(),
        _ => {
            let ens = estimation_ensemble(&sources[widest_phase(&cfg.acquisition.phases_deg)], cfg.analysis.mode_traces)?;
            estimate_mode(&ens, cfg)?
        }
    };

    let (lpf, delay) = match cfg.lpf.kind {
        LpfKind::AsBuilt => {
            let tau = cfg.lpf.tau_ns.expect("validated").map(|t| t * 1e-9);
            (FilterCoefficients::new(tau)?, cfg.lpf.delay_ns.unwrap_or(0.0) * 1e-9)
        }
        LpfKind::Matched => {
            let d = design_lpf(&estimated)?;
            (d.coeffs, d.delay)
        }
    };
    let readout = lpf.readout_mode(&grid, 0.0, delay)?;
    let mode = ModeReport {
        estimator: cfg.analysis.estimator,
        overlap_theory: inner_product(&estimated, &theory)?,
        overlap_lpf: inner_product(&readout, &estimated)?,
        lpf_tau_ns: lpf.tau.map(|t| t * 1e9),
        lpf_delay_ns: delay * 1e9,
    };
    log::info!(
        "{}: mode overlap with theory {:.4}, LPF overlap {:.4}",
        cfg.name,
        mode.overlap_theory,
        mode.overlap_lpf
    );

    let mut records = Vec::with_capacity(phases.len() * n_events);
    for (p, deg) in cfg.acquisition.phases_deg.iter().enumerate() {
        let src = &sources[p];
        let chunk: Vec<EventRecord> = (0..n_events)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(buf, trace), e| {
                    let label = src.trace(e, buf, trace)?;
                    Ok(EventRecord {
                        phase_deg: *deg,
                        event_id: e,
                        x_post: project(trace, &estimated),
                        x_realtime: project(trace, &readout),
                        label,
                    })
                },
            )
            .collect::<Result<_>>()?;
        records.extend(chunk);
    }

    let dataset = QuadratureDataset {
        meta: DatasetMeta { config: cfg.clone(), config_hash: cfg.hash(), seed: cfg.seed, mode },
        records,
    };
    Ok(ExperimentRun { dataset, theory_mode: theory, estimated_mode: estimated, readout_mode: readout, lpf })
}

/// Traces of the first `count` events at one phase, cropped to the estimation window around t₀.
pub fn estimation_ensemble(source: &PhaseSource, count: usize) -> Result<TraceEnsemble> {
    let mode = &source.mode;
    let grid = mode.grid;
    let start = grid
        .index_of(mode.t0 - ESTIMATION_BEFORE)
        .ok_or_else(|| Error::GridTooShort("estimation window starts before the trace".into()))?;
    let stop = grid
        .index_of(mode.t0 + ESTIMATION_AFTER)
        .ok_or_else(|| Error::GridTooShort("estimation window ends after the trace".into()))?;
    let crops = source.cropped_traces(count, start..stop)?;
    TraceEnsemble::new(TimeGrid::new(grid.dt, stop - start, grid.time(start))?, mode.t0, crops)
}

/// Runs the configured estimator and embeds the result back on the full window.
pub fn estimate_mode(ens: &TraceEnsemble, cfg: &ExperimentConfig) -> Result<TemporalMode> {
    let full = cfg.grid()?;
    let est = match cfg.analysis.estimator {
        Estimator::Pca => pca_mode(ens)?,
        Estimator::Ica => ica_mode(ens, cfg.analysis.ica_components, cfg.seed ^ 0x1CA)?,
        Estimator::Theory => return cfg.theory_mode(),
    };
    let start = full.index_of(ens.grid.start).ok_or(Error::GridMismatch)?;
    let mut values = vec![0.0; full.len];
    values[start..start + est.values.len()].copy_from_slice(&est.values);
    TemporalMode::from_samples(full, ens.t0, values)
}

/// `count` quadrature samples of `rho` at each phase, independent of any trace model.
pub fn sample_state_quadratures(rho: &DensityMatrix, phases: &[f64], count: usize, seed: u64) -> Result<Vec<PhaseSamples>> {
    phases
        .iter()
        .enumerate()
        .map(|(p, &theta)| {
            let sampler = QuadratureSampler::new(rho, theta)?;
            let mut rng = event_rng(seed, p, usize::MAX);
            Ok(PhaseSamples { theta, x: (0..count).map(|_| sampler.sample(&mut rng)).collect() })
        })
        .collect()
}

/// Samples of a lone Gaussian background in one mode, used for vacuum/null checks.
pub fn mode_projected_background(
    s: &SqueezingSpectrum,
    theta: f64,
    mode: &TemporalMode,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let synth = BackgroundSynth::new(s, theta, mode.grid.len, 1.0 / mode.grid.dt)?;
    let mut buf = Vec::new();
    let mut out = Vec::new();
    Ok((0..count)
        .map(|e| {
            let mut rng = event_rng(seed, 0, e);
            synth.generate(&mut rng, &mut buf, &mut out);
            project(&out, mode)
        })
        .collect())
}

/// Number of standard deviations of a sample variance estimate at `n` draws.
pub fn variance_rel_se(n: usize) -> f64 {
    (2.0 / (n as f64 - 1.0)).sqrt()
}
