//! Fractional Brownian motion: covariance, exact path sampling, and the
//! mapping from noise paths to asset paths.
//!
//! Two exact sampling backends are provided. Dense Cholesky factorization of
//! the covariance matrix is the reference method and works on any subgrid.
//! Circulant embedding of the stationary fractional Gaussian noise increments
//! is the fast method for large uniform subgrids; its eigenvalues are
//! nonnegative for H in (0, 1), so the embedding is exact as well.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::params::{HurstIndex, ModelParams};
use crate::payoff::PayoffSpec;

/// Covariance r(t, s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2 of fBm.
pub fn covariance(t: f64, s: f64, h: HurstIndex) -> Result<f64> {
    if t < 0.0 || s < 0.0 {
        let bad = if t < 0.0 { t } else { s };
        return Err(Error::InvalidParameter {
            name: "time",
            value: bad,
            constraint: "covariance arguments must be >= 0",
        });
    }
    let two_h = h.two_h();
    Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// A sampled fBm path on a grid's subgrid, with B_0 = 0.
#[derive(Debug, Clone)]
pub struct FbmPath {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
}

impl FbmPath {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.subgrid().len() {
            return Err(Error::Grid(format!(
                "path has {} values for a subgrid of {} points",
                values.len(),
                grid.subgrid().len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidParameter {
                name: "values[0]",
                value: values[0],
                constraint: "B_0 = 0",
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at_index(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// An asset path S_t = spot * exp(mu t + sigma B_t) aligned with its fBm path.
#[derive(Debug, Clone)]
pub struct AssetPath {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
}

impl AssetPath {
    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at_index(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn spot(&self) -> f64 {
        self.values[0]
    }
}

/// Pointwise exponential map from an fBm path to the asset path.
pub fn asset_path(b: &FbmPath, params: &ModelParams) -> AssetPath {
    let times = b.grid().subgrid();
    let values = times
        .iter()
        .zip(b.values().iter())
        .map(|(&t, &bt)| params.spot * (params.mu * t + params.sigma * bt).exp())
        .collect();
    AssetPath {
        grid: b.grid.clone(),
        values,
    }
}

/// Frictionless (continuous-trading, zero-cost) value f(S_t) at a subgrid time.
pub fn frictionless_value(s: &AssetPath, payoff: &PayoffSpec, t: f64) -> Result<f64> {
    let idx = s.grid().subgrid_index_of(t)?;
    Ok(payoff.value(s.values[idx]))
}

/// Path generation backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerBackend {
    /// Dense Cholesky factorization of the subgrid covariance matrix.
    Cholesky,
    /// Davies-Harte circulant embedding of fractional Gaussian noise;
    /// requires a uniform subgrid.
    Circulant,
}

enum Factor {
    Cholesky {
        lower: DMatrix<f64>,
    },
    Circulant {
        sqrt_eig: Vec<f64>,
        step_scale: f64,
    },
}

/// Precomputed sampler for fBm paths on a grid.
pub struct PathSampler {
    grid: Arc<TimeGrid>,
    factor: Factor,
}

impl PathSampler {
    pub fn new(grid: Arc<TimeGrid>, h: HurstIndex, backend: SamplerBackend) -> Result<Self> {
        let factor = match backend {
            SamplerBackend::Cholesky => {
                let times = &grid.subgrid()[1..];
                let n = times.len();
                let mut cov = DMatrix::<f64>::zeros(n, n);
                for i in 0..n {
                    for j in 0..=i {
                        let c = covariance(times[i], times[j], h)?;
                        cov[(i, j)] = c;
                        cov[(j, i)] = c;
                    }
                }
                let chol = cov.cholesky().ok_or_else(|| {
                    Error::Factorization(
                        "covariance matrix is not positive definite (degenerate grid?)".into(),
                    )
                })?;
                Factor::Cholesky {
                    lower: chol.unpack(),
                }
            }
            SamplerBackend::Circulant => {
                if !grid.is_uniform() {
                    return Err(Error::Factorization(
                        "circulant embedding requires a uniform subgrid".into(),
                    ));
                }
                let n = grid.subgrid().len() - 1;
                let dt = grid.maturity() / n as f64;
                let sqrt_eig = circulant_sqrt_eigenvalues(n, h)?;
                Factor::Circulant {
                    sqrt_eig,
                    step_scale: dt.powf(h.value()),
                }
            }
        };
        Ok(Self { grid, factor })
    }

    /// Draw one path using the supplied RNG.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> FbmPath {
        let n = self.grid.subgrid().len() - 1;
        let mut values = vec![0.0; n + 1];
        match &self.factor {
            Factor::Cholesky { lower } => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += lower[(i, j)] * z[j];
                    }
                    values[i + 1] = acc;
                }
            }
            Factor::Circulant {
                sqrt_eig,
                step_scale,
            } => {
                let incr = sample_fgn(sqrt_eig, n, rng);
                let mut acc = 0.0;
                for (i, x) in incr.iter().enumerate().take(n) {
                    acc += x * step_scale;
                    values[i + 1] = acc;
                }
            }
        }
        FbmPath {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// Eigenvalue square roots of the circulant embedding of the unit-step fGn
/// autocovariance, gamma(k) = ((k+1)^{2H} - 2 k^{2H} + |k-1|^{2H}) / 2.
fn circulant_sqrt_eigenvalues(n: usize, h: HurstIndex) -> Result<Vec<f64>> {
    let two_h = h.two_h();
    let gamma = |k: f64| 0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h));
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
    for j in 0..=n {
        row.push(Complex::new(gamma(j as f64), 0.0));
    }
    for j in n + 1..m {
        row.push(Complex::new(gamma((m - j) as f64), 0.0));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);

    let mut out = Vec::with_capacity(m);
    for c in &row {
        let lam = c.re;
        if lam < -1e-9 * n as f64 {
            return Err(Error::Factorization(format!(
                "circulant embedding produced negative eigenvalue {lam:.3e}"
            )));
        }
        out.push(lam.max(0.0).sqrt());
    }
    Ok(out)
}

/// One batch of n unit-step fGn samples via the circulant spectral recipe.
fn sample_fgn<R: Rng>(sqrt_eig: &[f64], n: usize, rng: &mut R) -> Vec<f64> {
    let m = 2 * n;
    let scale0 = 1.0 / (m as f64).sqrt();
    let scale = 1.0 / (2.0 * m as f64).sqrt();
    let mut spec = vec![Complex::new(0.0, 0.0); m];
    spec[0] = Complex::new(sqrt_eig[0] * scale0 * rng.sample::<f64, _>(StandardNormal), 0.0);
    spec[n] = Complex::new(sqrt_eig[n] * scale0 * rng.sample::<f64, _>(StandardNormal), 0.0);
    for j in 1..n {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let a = Complex::new(re, im) * (sqrt_eig[j] * scale);
        spec[j] = a;
        spec[m - j] = a.conj();
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut spec);
    spec.iter().take(n).map(|c| c.re).collect()
}

/// Reproducible per-path RNG: stream `stream` of the master seed.
pub fn substream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generate `n_paths` exact fBm sample paths, deterministically in `seed`.
///
/// Paths are sharded across the rayon pool; path i always consumes RNG
/// stream i, so the output is independent of the scheduling.
pub fn generate_paths(
    grid: &Arc<TimeGrid>,
    h: HurstIndex,
    n_paths: usize,
    seed: u64,
    backend: SamplerBackend,
) -> Result<Vec<FbmPath>> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            value: 0.0,
            constraint: "n_paths >= 1",
        });
    }
    let sampler = PathSampler::new(grid.clone(), h, backend)?;
    let paths: Vec<FbmPath> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream_rng(seed, i as u64);
            sampler.sample(&mut rng)
        })
        .collect();
    Ok(paths)
}
