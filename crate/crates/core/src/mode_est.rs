//! Temporal-mode estimation from raw heralded traces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::temporal::{TemporalMode, TimeGrid};

pub const PCA_MIN_TRACES: usize = 1000;
pub const ICA_DEFAULT_COMPONENTS: usize = 20;
pub const ICA_MAX_COMPONENTS: usize = 50;
const ICA_RESTARTS: usize = 5;
const ICA_MAX_ITER: usize = 500;
const ICA_TOL: f64 = 1e-10;

/// Raw traces (events × samples) recorded around the herald at one LO phase.
#[derive(Debug, Clone)]
pub struct TraceEnsemble {
    pub grid: TimeGrid,
    pub t0: f64,
    data: DMatrix<f64>,
}

impl TraceEnsemble {
    pub fn new(grid: TimeGrid, t0: f64, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty trace ensemble".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != grid.len) {
            return Err(Error::DimensionMismatch(bad.len(), grid.len));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite trace sample".into()));
        }
        let data = DMatrix::from_fn(n, grid.len, |i, j| rows[i][j]);
        Ok(TraceEnsemble { grid, t0, data })
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    fn centered(&self) -> DMatrix<f64> {
        let mut x = self.data.clone();
        for j in 0..x.ncols() {
            let mean = x.column(j).mean();
            x.column_mut(j).add_scalar_mut(-mean);
        }
        x
    }

    fn to_mode(&self, values: Vec<f64>) -> Result<TemporalMode> {
        let (_, peak) = self
            .grid
            .times()
            .iter()
            .zip(&values)
            .fold((0.0, 0.0f64), |b, (&t, &v)| if v.abs() > b.1.abs() { (t, v) } else { b });
        let sign = if peak < 0.0 { -1.0 } else { 1.0 };
        TemporalMode::from_samples(self.grid, self.t0, values.into_iter().map(|v| sign * v).collect())
    }
}

/// Leading principal component and the covariance spectrum it came from.
#[derive(Debug, Clone)]
pub struct PcaOutcome {
    pub mode: TemporalMode,
    /// Covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Set when the leading gap is below 1% of the spectrum's total.
    pub ambiguous: bool,
}

fn sorted_eigen(cov: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn pca(ens: &TraceEnsemble) -> Result<PcaOutcome> {
    if ens.len() < PCA_MIN_TRACES {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least {PCA_MIN_TRACES} traces, got {}",
            ens.len()
        )));
    }
    let x = ens.centered();
    let cov = (x.transpose() * &x) / (ens.len() as f64 - 1.0);
    let (vals, vecs) = sorted_eigen(cov);
    let total: f64 = vals.iter().map(|v| v.abs()).sum();
    let ambiguous = vals.len() > 1 && (vals[0] - vals[1]) < 0.01 * total;
    let mode = ens.to_mode(vecs.column(0).iter().copied().collect())?;
    Ok(PcaOutcome { mode, eigenvalues: vals, ambiguous })
}

/// Leading principal component as a unit-norm, peak-positive mode.
pub fn pca_mode(ens: &TraceEnsemble) -> Result<TemporalMode> {
    let out = pca(ens)?;
    if out.ambiguous {
        log::warn!(
            "leading covariance eigenvalues {:.4e} and {:.4e} are not separated",
            out.eigenvalues[0],
            out.eigenvalues[1]
        );
    }
    Ok(out.mode)
}

/// Extracted non-Gaussian direction with its projected excess kurtosis.
#[derive(Debug, Clone)]
pub struct IcaOutcome {
    pub mode: TemporalMode,
    pub kurtosis: f64,
}

/// Smallest |excess kurtosis| accepted as a genuine non-Gaussian component,
/// several standard errors (√(24/m)) above the Gaussian sampling noise.
pub fn kurtosis_threshold(samples: usize) -> f64 {
    8.0 * (24.0 / samples as f64).sqrt()
}

/// One-unit FastICA with the kurtosis contrast in the top-`k` whitened PCA
/// subspace. Restarts are seeded from `seed`.
pub fn ica(ens: &TraceEnsemble, k: usize, seed: u64) -> Result<IcaOutcome> {
    if k == 0 || k > ICA_MAX_COMPONENTS || k > ens.grid.len {
        return Err(Error::InvalidArgument(format!("ICA subspace dimension {k} outside 1..={ICA_MAX_COMPONENTS}")));
    }
    let m = ens.len();
    if m < 10 * k {
        return Err(Error::InvalidArgument(format!("{m} traces are too few for a {k}-dimensional ICA")));
    }
    let x = ens.centered();
    let cov = (x.transpose() * &x) / (m as f64 - 1.0);
    let (vals, vecs) = sorted_eigen(cov);
    if vals[k - 1] <= 0.0 {
        return Err(Error::ModelViolation("whitening subspace is rank deficient".into()));
    }
    let basis = vecs.columns(0, k).into_owned();
    let mut z = &x * &basis;
    for c in 0..k {
        let s = vals[c].sqrt();
        z.column_mut(c).scale_mut(1.0 / s);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut converged_any = false;
    for _ in 0..ICA_RESTARTS {
        let mut w = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        w.normalize_mut();
        let mut converged = false;
        for _ in 0..ICA_MAX_ITER {
            let y = &z * &w;
            let y3 = y.map(|v| v * v * v);
            let mut next = z.transpose() * y3 / m as f64 - &w * 3.0;
            let norm = next.norm();
            if !(norm > 0.0) {
                break;
            }
            next /= norm;
            let change = 1.0 - next.dot(&w).abs();
            w = next;
            if change < ICA_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            continue;
        }
        converged_any = true;
        let y = &z * &w;
        let m2 = y.map(|v| v * v).sum() / m as f64;
        let m4 = y.map(|v| v.powi(4)).sum() / m as f64;
        let kurt = m4 / (m2 * m2) - 3.0;
        if best.as_ref().map_or(true, |b| kurt.abs() > b.0.abs()) {
            best = Some((kurt, w));
        }
    }
    if !converged_any {
        return Err(Error::NonConvergence(format!(
            "FastICA did not converge in {ICA_MAX_ITER} iterations from {ICA_RESTARTS} starts"
        )));
    }
    let (kurt, w) = best.expect("a converged start");
    if kurt.abs() < kurtosis_threshold(m) {
        return Err(Error::NonConvergence(format!(
            "no non-Gaussian component: best |excess kurtosis| {:.4} below {:.4}",
            kurt.abs(),
            kurtosis_threshold(m)
        )));
    }
    // the time-domain mode is the cross-covariance of the traces with the source
    let y = &z * &w;
    let mode_vals = x.transpose() * y / m as f64;
    Ok(IcaOutcome { mode: ens.to_mode(mode_vals.iter().copied().collect())?, kurtosis: kurt })
}

pub fn ica_mode(ens: &TraceEnsemble, k: usize, seed: u64) -> Result<TemporalMode> {
    Ok(ica(ens, k, seed)?.mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::{filter_mode, inner_product};
    use rand_distr::Distribution;

    fn synth(n: usize, excess: f64, seed: u64) -> (TraceEnsemble, TemporalMode) {
        let grid = TimeGrid::centered(1e-9, 128).unwrap();
        let f = filter_mode(6e7, 20e-9, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit: Vec<f64> = f.values.iter().map(|v| v * grid.dt.sqrt()).collect();
        let rows = (0..n)
            .map(|_| {
                let a: f64 = rng.sample::<f64, _>(StandardNormal) * excess.sqrt();
                (0..grid.len).map(|j| rng.sample::<f64, _>(StandardNormal) + a * unit[j]).collect()
            })
            .collect();
        (TraceEnsemble::new(grid, 20e-9, rows).unwrap(), f)
    }

    #[test]
    fn pca_recovers_injected_mode() {
        let (ens, f) = synth(10_000, 3.0, 1);
        let out = pca(&ens).unwrap();
        assert!(!out.ambiguous);
        assert!(inner_product(&out.mode, &f).unwrap() > 0.99);
        assert!((out.mode.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pca_white_noise_is_ambiguous() {
        let (ens, _) = synth(2_000, 0.0, 2);
        assert!(pca(&ens).unwrap().ambiguous);
    }

    #[test]
    fn pca_needs_enough_traces() {
        let (ens, _) = synth(500, 1.0, 3);
        assert!(pca(&ens).is_err());
    }

    #[test]
    fn ica_rejects_gaussian_data() {
        let (ens, _) = synth(5_000, 0.0, 4);
        assert!(matches!(ica(&ens, 10, 9), Err(Error::NonConvergence(_))));
    }

    #[test]
    fn ica_finds_bimodal_source_of_equal_variance() {
        // K orthonormal directions with unit variance; only f carries a bimodal source
        let grid = TimeGrid::centered(1e-9, 128).unwrap();
        let f = filter_mode(6e7, 20e-9, &grid).unwrap();
        let k = 8;
        let mut basis: Vec<Vec<f64>> = vec![f.values.iter().map(|v| v * grid.dt.sqrt()).collect()];
        for c in 1..k {
            let centre = -50.0 + 12.0 * c as f64;
            let mut v: Vec<f64> = (0..grid.len)
                .map(|j| (-((j as f64 - 64.0 - centre) / 6.0).powi(2)).exp())
                .collect();
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let jitter = rand_distr::Normal::new(0.0, 0.3).unwrap();
        let spread = 0.91f64.sqrt();
        let rows: Vec<Vec<f64>> = (0..10_000)
            .map(|_| {
                let mut row: Vec<f64> = (0..grid.len).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
                for (c, b) in basis.iter().enumerate() {
                    let a = if c == 0 {
                        (if rng.random::<bool>() { spread } else { -spread }) + jitter.sample(&mut rng)
                    } else {
                        rng.sample::<f64, _>(StandardNormal)
                    };
                    row.iter_mut().zip(b).for_each(|(x, y)| *x += a * y);
                }
                row
            })
            .collect();
        let ens = TraceEnsemble::new(grid, 20e-9, rows).unwrap();
        let out = ica(&ens, k, 11).unwrap();
        assert!(out.kurtosis < 0.0);
        assert!(inner_product(&out.mode, &f).unwrap() > 0.98);
        assert!(inner_product(&pca_mode(&ens).unwrap(), &f).unwrap().abs() < 0.9);
    }
}
