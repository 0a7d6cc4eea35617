//! Temporal modes of the heralded wave packet and the real-time low-pass filter.
//!
//! Rates are angular HWHM rates in rad/s; times are in seconds.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::nelder_mead;

/// Angular HWHM rate γ = 2π·(FWHM/2) for a cavity linewidth given as FWHM in Hz.
pub fn rate_from_fwhm(fwhm_hz: f64) -> f64 {
    PI * fwhm_hz
}

/// Uniform sampling grid t_k = start + k·dt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub len: usize,
    pub start: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, len: usize, start: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || len < 2 {
            return Err(Error::InvalidArgument(format!("bad grid: dt = {dt}, len = {len}")));
        }
        Ok(TimeGrid { dt, len, start })
    }

    /// `len` samples centred on t = 0, with t = 0 falling on sample `len / 2`.
    pub fn centered(dt: f64, len: usize) -> Result<Self> {
        Self::new(dt, len, -((len / 2) as f64) * dt)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.time(k)).collect()
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    /// Index of the sample nearest to `t`, if inside the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start) / self.dt).round();
        (k >= 0.0 && (k as usize) < self.len).then_some(k as usize)
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.len == other.len
            && ((self.dt - other.dt) / self.dt).abs() < 1e-12
            && (self.start - other.start).abs() < 1e-6 * self.dt
    }
}

impl Default for TimeGrid {
    /// 2048 samples at 1 ns around t = 0.
    fn default() -> Self {
        TimeGrid::centered(1e-9, 2048).expect("valid default grid")
    }
}

/// Analytic record of a cascade mode: f = N[Σ cᵢ e^{γᵢ(t−t₀)} (t<t₀) + (Σcᵢ) e^{−γ₄(t−t₀)} (t>t₀)].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeDescriptor {
    pub gammas: [f64; 4],
    pub coeffs: [f64; 4],
    pub norm: f64,
}

impl ModeDescriptor {
    pub fn from_rates(gammas: [f64; 4]) -> Self {
        let [g1, g2, g3, g4] = gammas;
        let c = |ga: f64, gb: f64, gi: f64| 2.0 * g4 * (gb - ga) / (g4 * g4 - gi * gi);
        let c1 = c(g2, g3, g1);
        let c2 = c(g3, g1, g2);
        let c3 = c(g1, g2, g3);
        let c4 = (g1 - g2) / (g4 - g3) + (g2 - g3) / (g4 - g1) + (g3 - g1) / (g4 - g2);
        let coeffs = [c1, c2, c3, c4];
        let sum: f64 = coeffs.iter().sum();
        let mut cross = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                cross += coeffs[i] * coeffs[j] / (gammas[i] + gammas[j]);
            }
        }
        let norm = (cross + sum * sum / (2.0 * g4)).powf(-0.5);
        ModeDescriptor { gammas, coeffs, norm }
    }

    /// Bracketed (unnormalized) expression at offset s = t − t₀.
    pub fn bracket(&self, s: f64) -> f64 {
        if s < 0.0 {
            self.coeffs.iter().zip(&self.gammas).map(|(c, g)| c * (g * s).exp()).sum()
        } else {
            self.coeffs.iter().sum::<f64>() * (-self.gammas[3] * s).exp()
        }
    }

    /// Left and right limits of the bracket at t₀.
    pub fn limits_at_t0(&self) -> (f64, f64) {
        (self.bracket(-f64::MIN_POSITIVE), self.bracket(0.0))
    }
}

/// Unit-norm sampled wave packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalMode {
    pub grid: TimeGrid,
    pub t0: f64,
    pub values: Vec<f64>,
    pub descriptor: Option<ModeDescriptor>,
}

impl TemporalMode {
    /// Normalizes `values` on `grid`.
    pub fn from_samples(grid: TimeGrid, t0: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len {
            return Err(Error::DimensionMismatch(values.len(), grid.len));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite mode samples".into()));
        }
        let norm = (values.iter().map(|v| v * v).sum::<f64>() * grid.dt).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("zero mode".into()));
        }
        Ok(TemporalMode { grid, t0, values: values.into_iter().map(|v| v / norm).collect(), descriptor: None })
    }

    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dt).sqrt()
    }

    pub fn peak(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |b: (usize, f64), (i, v)| if v.abs() > b.1.abs() { (i, v) } else { b })
    }

    /// Same shape evaluated with t₀ moved by `shift` (requires a whole number of samples).
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let k = (shift / self.grid.dt).round();
        if ((shift / self.grid.dt) - k).abs() > 1e-9 {
            return Err(Error::InvalidArgument("shift must be a multiple of dt".into()));
        }
        let k = k as i64;
        let n = self.grid.len as i64;
        let values = (0..n)
            .map(|i| {
                let j = i - k;
                if (0..n).contains(&j) {
                    self.values[j as usize]
                } else {
                    0.0
                }
            })
            .collect();
        let mut out = TemporalMode::from_samples(self.grid, self.t0 + shift, values)?;
        out.descriptor = self.descriptor;
        Ok(out)
    }

    /// Restricts the mode to `len` samples starting at sample `offset` and renormalizes.
    pub fn cropped(&self, offset: usize, len: usize) -> Result<Self> {
        if offset + len > self.grid.len {
            return Err(Error::GridTooShort(format!("crop {offset}+{len} beyond {}", self.grid.len)));
        }
        let grid = TimeGrid::new(self.grid.dt, len, self.grid.time(offset))?;
        let mut out = TemporalMode::from_samples(grid, self.t0, self.values[offset..offset + len].to_vec())?;
        out.descriptor = self.descriptor;
        Ok(out)
    }
}

fn check_span(grid: &TimeGrid, t0: f64, left: f64, right: f64) -> Result<()> {
    if t0 - left < grid.start || t0 + right > grid.end() {
        return Err(Error::GridTooShort(format!(
            "need [{:.3e}, {:.3e}] s, grid spans [{:.3e}, {:.3e}] s",
            t0 - left,
            t0 + right,
            grid.start,
            grid.end()
        )));
    }
    Ok(())
}

fn positive_rate(g: f64) -> Result<()> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate {g} must be positive")));
    }
    Ok(())
}

/// Double-sided exponential √γ e^{−γ|t−t₀|} of a bare OPO.
pub fn opo_mode(gamma: f64, t0: f64, grid: &TimeGrid) -> Result<TemporalMode> {
    positive_rate(gamma)?;
    check_span(grid, t0, 5.0 / gamma, 5.0 / gamma)?;
    let values = grid.times().iter().map(|t| gamma.sqrt() * (-gamma * (t - t0).abs()).exp()).collect();
    TemporalMode::from_samples(*grid, t0, values)
}

/// One-sided rising exponential √(2γ) e^{γ(t−t₀)} Θ(t₀−t) of a Lorentzian filter.
pub fn filter_mode(gamma: f64, t0: f64, grid: &TimeGrid) -> Result<TemporalMode> {
    positive_rate(gamma)?;
    check_span(grid, t0, 5.0 / gamma, 0.0)?;
    let values = grid
        .times()
        .iter()
        .map(|&t| if t <= t0 { (2.0 * gamma).sqrt() * (gamma * (t - t0)).exp() } else { 0.0 })
        .collect();
    TemporalMode::from_samples(*grid, t0, values)
}

/// Mode of an OPO (rate `gammas[3]`) followed by three filter cavities.
///
/// Nearly coincident rates make the closed form singular; those cases are
/// evaluated by convolution in the frequency domain instead.
pub fn composite_mode(gammas: [f64; 4], t0: f64, grid: &TimeGrid) -> Result<TemporalMode> {
    for &g in &gammas {
        positive_rate(g)?;
    }
    let slowest = gammas.iter().copied().fold(f64::INFINITY, f64::min);
    check_span(grid, t0, 5.0 / slowest, 5.0 / gammas[3])?;
    let degenerate = (0..4).any(|i| (0..i).any(|j| ((gammas[i] - gammas[j]) / gammas[j]).abs() < 1e-6));
    if degenerate {
        return composite_mode_by_fft(gammas, t0, grid);
    }
    let mut desc = ModeDescriptor::from_rates(gammas);
    // the overall sign of the closed form depends on the rate ordering
    let lead_sign = grid
        .times()
        .iter()
        .map(|t| desc.bracket(t - t0))
        .fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b })
        .signum();
    if lead_sign < 0.0 {
        desc.coeffs = desc.coeffs.map(|c| -c);
    }
    let values = grid.times().iter().map(|t| desc.norm * desc.bracket(t - t0)).collect();
    let mut mode = TemporalMode::from_samples(*grid, t0, values)?;
    mode.descriptor = Some(desc);
    Ok(mode)
}

fn composite_mode_by_fft(gammas: [f64; 4], t0: f64, grid: &TimeGrid) -> Result<TemporalMode> {
    let n = grid.len;
    let span = n as f64 * grid.dt;
    let g4 = gammas[3];
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| {
            let jj = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            let w = 2.0 * PI * jj / span;
            let mut f = Complex64::new(g4.sqrt() * 2.0 * g4 / (g4 * g4 + w * w), 0.0);
            for &g in &gammas[..3] {
                f *= (2.0 * g).sqrt() / Complex64::new(g, -w);
            }
            f * Complex64::from_polar(1.0, w * (grid.start - t0))
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    TemporalMode::from_samples(*grid, t0, buf.iter().map(|c| c.re / span).collect())
}

/// Discrete ∫ f g dt.
pub fn inner_product(f: &TemporalMode, g: &TemporalMode) -> Result<f64> {
    if !f.grid.same_as(&g.grid) {
        return Err(Error::GridMismatch);
    }
    Ok(f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>() * f.grid.dt)
}

/// |F(ω)|² of a mode, frequencies ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    /// Frequencies in Hz.
    pub freq: Vec<f64>,
    /// |F|², normalized so that Σ power·Δf = 1.
    pub power: Vec<f64>,
    /// Bin spacing Δf in Hz.
    pub df: f64,
}

/// Power spectrum of a mode on its FFT grid. Warns about leakage when the
/// mode has not decayed at the grid edges.
pub fn mode_power_spectrum(f: &TemporalMode) -> ModeSpectrum {
    let n = f.grid.len;
    let (_, peak) = f.peak();
    let edge = f.values[0].abs().max(f.values[n - 1].abs());
    if edge > 1e-3 * peak.abs() {
        log::warn!("mode boundary value {:.2e} of peak: spectral leakage", edge / peak.abs());
    }
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let dt = f.grid.dt;
    let df = 1.0 / (n as f64 * dt);
    let mut pairs: Vec<(f64, f64)> = buf
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let jj = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            (jj * df, c.norm_sqr() * dt * dt)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    ModeSpectrum { freq: pairs.iter().map(|p| p.0).collect(), power: pairs.iter().map(|p| p.1).collect(), df }
}

/// Time constants of a cascade of three first-order low-pass sections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    /// Stage time constants in seconds.
    pub tau: [f64; 3],
    /// Scale that gives the time-reversed impulse response unit L² norm
    /// (so the dc gain equals this value).
    pub gain: f64,
}

impl FilterCoefficients {
    pub fn new(tau: [f64; 3]) -> Result<Self> {
        if tau.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidArgument(format!("time constants must be positive: {tau:?}")));
        }
        let energy = response_energy(&tau);
        Ok(FilterCoefficients { tau, gain: energy.powf(-0.5) })
    }

    pub fn tau_min(&self) -> f64 {
        self.tau.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn state_matrix(&self) -> (Matrix3<f64>, Vector3<f64>) {
        state_space(&self.tau)
    }

    /// Unscaled impulse response h(k·dt), k = 0..len, evaluated exactly.
    pub fn impulse_response(&self, dt: f64, len: usize) -> Vec<f64> {
        let (a, b) = self.state_matrix();
        let phi = (a * dt).exp();
        let mut x = b;
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(x[2]);
            x = phi * x;
        }
        out
    }

    /// The mode read out by sampling the filter output at `t_read`:
    /// g(t) ∝ h(t_read − t), evaluated exactly even between grid samples.
    pub fn readout_mode(&self, grid: &TimeGrid, t0: f64, t_read: f64) -> Result<TemporalMode> {
        if t_read < grid.start || t_read > grid.end() {
            return Err(Error::GridTooShort(format!("readout time {t_read:.3e} outside grid")));
        }
        let last = (((t_read - grid.start) / grid.dt).floor() as usize).min(grid.len - 1);
        let (a, b) = self.state_matrix();
        let mut x = (a * (t_read - grid.time(last))).exp() * b;
        let phi = (a * grid.dt).exp();
        let mut values = vec![0.0; grid.len];
        for k in (0..=last).rev() {
            values[k] = x[2];
            x = phi * x;
        }
        TemporalMode::from_samples(*grid, t0, values)
    }
}

fn state_space(tau: &[f64; 3]) -> (Matrix3<f64>, Vector3<f64>) {
    let [a1, a2, a3] = tau.map(|t| 1.0 / t);
    let a = Matrix3::new(-a1, 0.0, 0.0, a2, -a2, 0.0, 0.0, a3, -a3);
    (a, Vector3::new(a1, 0.0, 0.0))
}

/// ∫₀^∞ h(t)² dt from the controllability Gramian, A W + W Aᵀ + b bᵀ = 0.
fn response_energy(tau: &[f64; 3]) -> f64 {
    let (a, b) = state_space(tau);
    let id = Matrix3::<f64>::identity();
    let mut k = SMatrix::<f64, 9, 9>::zeros();
    // vec(A W + W Aᵀ) = (I ⊗ A + A ⊗ I) vec(W), column-major vec
    for i in 0..3 {
        for j in 0..3 {
            for p in 0..3 {
                for q in 0..3 {
                    k[(i + 3 * j, p + 3 * q)] = id[(j, q)] * a[(i, p)] + a[(j, q)] * id[(i, p)];
                }
            }
        }
    }
    let bb = b * b.transpose();
    let rhs = SVector::<f64, 9>::from_iterator(bb.iter().map(|v| -v));
    let w = k.lu().solve(&rhs).expect("stable system has a unique Gramian");
    w[2 + 3 * 2]
}

/// Designed filter, readout delay after t₀ (s) and overlap with the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpfDesign {
    pub coeffs: FilterCoefficients,
    pub delay: f64,
    pub overlap: f64,
}

/// Overlap between `target` and the filter output sampled `delay` after its t₀.
pub fn lpf_overlap(coeffs: &FilterCoefficients, target: &TemporalMode, delay: f64) -> Result<f64> {
    inner_product(&coeffs.readout_mode(&target.grid, target.t0, target.t0 + delay)?, target)
}

/// Fits three stage time constants and the readout delay so the time-reversed
/// impulse response matches `target`, by Nelder-Mead over (log τ, delay)
/// from three starting points.
pub fn design_lpf(target: &TemporalMode) -> Result<LpfDesign> {
    let dt = target.grid.dt;
    let k0 = target
        .grid
        .index_of(target.t0)
        .ok_or_else(|| Error::GridTooShort("target t0 outside grid".into()))?;
    let after: f64 = target.values[k0 + 1..].iter().map(|v| v * v).sum::<f64>() * dt;
    if after > 0.05 {
        return Err(Error::InvalidArgument(format!(
            "target is not causal-rising: {:.1}% of its energy lies after t0",
            100.0 * after
        )));
    }
    // energy-weighted lead time sets the starting scale
    let lead: f64 = target.values[..=k0]
        .iter()
        .enumerate()
        .map(|(k, v)| (k0 - k) as f64 * dt * v * v)
        .sum::<f64>()
        * dt;
    let lead = lead.max(dt);
    let objective = |x: &[f64]| -> f64 {
        let tau = [x[0].exp(), x[1].exp(), x[2].exp()];
        match FilterCoefficients::new(tau).and_then(|c| lpf_overlap(&c, target, x[3] * dt)) {
            Ok(o) if o.is_finite() => -o,
            _ => 1.0,
        }
    };
    let starts = [[1.0, 0.5, 0.125], [0.5, 0.5, 0.5], [1.0, 0.1, 0.1]];
    let mut best: Option<(f64, [f64; 3], f64)> = None;
    for s in &starts {
        let mut x0: Vec<f64> = s.iter().map(|f| (f * lead).ln()).collect();
        x0.push(0.5);
        let res = nelder_mead(objective, &x0, 0.5, 1e-12, 6000);
        let tau = [res.x[0].exp(), res.x[1].exp(), res.x[2].exp()];
        if best.map_or(true, |b| -res.value > b.0) {
            best = Some((-res.value, tau, res.x[3] * dt));
        }
    }
    let (overlap, mut tau, delay) = best.expect("at least one start");
    tau.sort_by(|a, b| b.total_cmp(a));
    if overlap < 0.95 {
        return Err(Error::NonConvergence(format!("best LPF overlap {overlap:.4} below 0.95")));
    }
    Ok(LpfDesign { coeffs: FilterCoefficients::new(tau)?, delay, overlap })
}

/// Runs `trace` (sampled at `dt`) through the filter, scaled by its gain.
///
/// Each step propagates the exact state transition over dt and injects the
/// current sample with weight dt, so a unit-area impulse reproduces h(k·dt).
pub fn lpf_apply(coeffs: &FilterCoefficients, trace: &[f64], dt: f64) -> Result<Vec<f64>> {
    if dt > coeffs.tau_min() / 10.0 {
        return Err(Error::Undersampled { dt, tau_min: coeffs.tau_min() });
    }
    let (a, b) = coeffs.state_matrix();
    let phi = (a * dt).exp();
    let mut x = Vector3::zeros();
    Ok(trace
        .iter()
        .map(|&u| {
            x = phi * x + b * (u * dt);
            coeffs.gain * x[2]
        })
        .collect())
}

/// Value of a sampled signal at time `t`, by linear interpolation.
pub fn sample_at(signal: &[f64], grid: &TimeGrid, t: f64) -> Result<f64> {
    if signal.len() != grid.len {
        return Err(Error::DimensionMismatch(signal.len(), grid.len));
    }
    let u = (t - grid.start) / grid.dt;
    if u < 0.0 || u > (grid.len - 1) as f64 {
        return Err(Error::GridTooShort(format!("t = {t:.3e} outside grid")));
    }
    let k = (u.floor() as usize).min(grid.len - 2);
    let w = u - k as f64;
    Ok(signal[k] * (1.0 - w) + signal[k + 1] * w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1() -> [f64; 4] {
        [rate_from_fwhm(136e6), rate_from_fwhm(18.7e6), rate_from_fwhm(94e6), rate_from_fwhm(130e6)]
    }

    #[test]
    fn opo_mode_shape() {
        let g = rate_from_fwhm(130e6);
        assert!((g - 2.0 * PI * 65e6).abs() < 1e-3);
        let grid = TimeGrid::centered(0.01e-9, 20001).unwrap();
        let m = opo_mode(g, 0.0, &grid).unwrap();
        assert!((m.norm() - 1.0).abs() < 1e-12);
        let (k0, peak) = m.peak();
        assert_eq!(k0, 10000);
        let v = sample_at(&m.values, &grid, 1.0 / g).unwrap();
        assert!((v / peak - (-1f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn filter_mode_is_causal() {
        let g = rate_from_fwhm(18.7e6);
        assert!((g - 2.0 * PI * 9.35e6).abs() < 1e-3);
        let grid = TimeGrid::default();
        let m = filter_mode(g, 0.0, &grid).unwrap();
        let k0 = grid.index_of(0.0).unwrap();
        assert!(m.values[k0 + 1..].iter().all(|&v| v == 0.0));
        assert!((m.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_grid_rejected() {
        let grid = TimeGrid::centered(1e-9, 64).unwrap();
        assert!(matches!(opo_mode(1e7, 0.0, &grid), Err(Error::GridTooShort(_))));
    }

    #[test]
    fn shifted_double_exponential_overlap() {
        let g = 1e8;
        let grid = TimeGrid::centered(0.005e-9, 40001).unwrap();
        let a = opo_mode(g, 0.0, &grid).unwrap();
        let b = opo_mode(g, 10e-9, &grid).unwrap();
        let o = inner_product(&a, &b).unwrap();
        assert!((o - 2.0 / std::f64::consts::E).abs() < 1e-4, "{o}");
    }

    #[test]
    fn grid_mismatch() {
        let a = opo_mode(1e8, 0.0, &TimeGrid::default()).unwrap();
        let b = opo_mode(1e8, 0.0, &TimeGrid::centered(0.5e-9, 4096).unwrap()).unwrap();
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn composite_continuity_and_normalization() {
        let d = ModeDescriptor::from_rates(table1());
        let (l, r) = d.limits_at_t0();
        assert!((l - r).abs() < 1e-9 * r.abs().max(1.0));
        // analytic N against a fine Riemann sum of the bracket
        let dt = 0.002e-9;
        let s: f64 = (-200_000..200_000).map(|k| d.bracket(k as f64 * dt).powi(2)).sum::<f64>() * dt;
        assert!((d.norm * d.norm * s - 1.0).abs() < 1e-4);
    }

    #[test]
    fn composite_limits() {
        let grid = TimeGrid::centered(0.05e-9, 16384).unwrap();
        let g4 = 2e8;
        let wide = composite_mode([1e11, 2e11, 3e11, g4], 0.0, &grid).unwrap();
        let opo = opo_mode(g4, 0.0, &grid).unwrap();
        assert!(inner_product(&wide, &opo).unwrap() > 0.999);
        assert!(matches!(
            composite_mode([1e11, 2e6, 3e11, g4], 0.0, &grid),
            Err(Error::GridTooShort(_))
        ));
        let grid = TimeGrid::centered(0.2e-9, 32768).unwrap();
        let narrow = composite_mode([1e11, 2e6, 3e11, g4], 0.0, &grid).unwrap();
        let rising = filter_mode(2e6, 0.0, &grid).unwrap();
        let o = inner_product(&narrow, &rising).unwrap();
        assert!(o > 0.99, "{o}");
    }

    #[test]
    fn fft_fallback_matches_closed_form() {
        let grid = TimeGrid::default();
        let g = table1();
        let exact = composite_mode(g, 0.0, &grid).unwrap();
        let fallback = composite_mode_by_fft(g, 0.0, &grid).unwrap();
        assert!(inner_product(&exact, &fallback).unwrap() > 0.9999);
        let degenerate = composite_mode([g[0], g[0], g[2], g[3]], 0.0, &grid).unwrap();
        assert!(degenerate.descriptor.is_none());
        assert!((degenerate.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_parseval_and_lorentzian() {
        let g = 2e8;
        let m = filter_mode(g, 0.0, &TimeGrid::centered(0.05e-9, 32768).unwrap()).unwrap();
        let s = mode_power_spectrum(&m);
        let total: f64 = s.power.iter().sum::<f64>() * s.df;
        assert!((total - 1.0).abs() < 1e-10);
        // |F|² = 2γ/(γ²+ω²)
        for (f, p) in s.freq.iter().zip(&s.power).filter(|(f, _)| f.abs() < 1e8).step_by(50) {
            let w = 2.0 * PI * f;
            let want = 2.0 * g / (g * g + w * w);
            assert!((p - want).abs() / want < 0.01, "{f}: {p} vs {want}");
        }
    }

    #[test]
    fn impulse_response_matches_partial_fractions() {
        let c = FilterCoefficients::new([15e-9, 6e-9, 2e-9]).unwrap();
        let h = c.impulse_response(0.1e-9, 2000);
        let [t1, t2, t3] = c.tau;
        // residues of Π 1/(1 + sτᵢ)
        let analytic = |t: f64| {
            t1 * (-t / t1).exp() / ((t1 - t2) * (t1 - t3))
                + t2 * (-t / t2).exp() / ((t2 - t1) * (t2 - t3))
                + t3 * (-t / t3).exp() / ((t3 - t1) * (t3 - t2))
        };
        let rms = (h.iter().enumerate().map(|(k, v)| (v - analytic(k as f64 * 0.1e-9)).powi(2)).sum::<f64>()
            / h.len() as f64)
            .sqrt();
        let peak = h.iter().cloned().fold(0.0, f64::max);
        assert!(rms < 1e-3 * peak, "{rms}");
        assert!(h.iter().all(|&v| v >= 0.0));
        let energy: f64 = c.impulse_response(0.01e-9, 40000).iter().map(|v| v * v).sum::<f64>() * 0.01e-9;
        assert!((energy * c.gain * c.gain - 1.0).abs() < 1e-3);
    }

    #[test]
    fn lpf_dc_and_undersampling() {
        let c = FilterCoefficients::new([15e-9, 6e-9, 2e-9]).unwrap();
        let y = lpf_apply(&c, &vec![1.0; 20000], 0.02e-9).unwrap();
        assert!((y[19999] / c.gain - 1.0).abs() < 1e-3);
        assert!(matches!(lpf_apply(&c, &[1.0], 1e-9), Err(Error::Undersampled { .. })));
    }

    #[test]
    fn single_pole_target() {
        let grid = TimeGrid::default();
        let target = filter_mode(rate_from_fwhm(18.7e6), 0.0, &grid).unwrap();
        let d = design_lpf(&target).unwrap();
        assert!(d.overlap > 0.99, "{d:?}");
        let g = rate_from_fwhm(18.7e6);
        assert!((d.coeffs.tau[0] * g - 1.0).abs() < 0.1, "{d:?}");
    }

    #[test]
    fn composite_target_and_translation() {
        let grid = TimeGrid::default();
        let target = composite_mode(table1(), 0.0, &grid).unwrap();
        let d = design_lpf(&target).unwrap();
        assert!(d.overlap >= 0.988, "{d:?}");
        let moved = design_lpf(&target.shifted(37e-9).unwrap()).unwrap();
        assert!((moved.overlap - d.overlap).abs() < 1e-4);
    }
}
