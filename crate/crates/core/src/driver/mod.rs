//! Driving noise: Wiener paths `W` and fractional Brownian paths `Z`.
//!
//! Every sampler is a pure function of its parameters and a [`SeedSpec`].
//! Samplers that precompute a factorization ([`FbmSampler`]) are `Sync` and are
//! shared read-only across Monte Carlo workers.

mod cholesky;
mod circulant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path::{GridPath, PathError};

pub use cholesky::ToeplitzCholesky;
pub use circulant::CirculantEmbedding;

/// Largest grid for which [`FbmMethod::auto`] picks the exact Cholesky factor.
pub const CHOLESKY_MAX_STEPS: usize = 4096;

/// RNG channel of the Wiener increments.
pub const CHANNEL_WIENER: u64 = 0x5749_454e;
/// RNG channel of fBm coordinate `j` is `CHANNEL_FBM + j`.
pub const CHANNEL_FBM: u64 = 0x4642_4d00;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("covariance matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("circulant embedding has negative eigenvalue {value:e} at index {index}")]
    NegativeEigenvalue { index: usize, value: f64 },
    #[error("window contains fewer than two grid points")]
    EmptyWindow,
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FbmMethod {
    Cholesky,
    DaviesHarte,
}

impl FbmMethod {
    /// Exact Cholesky up to [`CHOLESKY_MAX_STEPS`], circulant embedding beyond.
    pub fn auto(n_steps: usize) -> Self {
        if n_steps <= CHOLESKY_MAX_STEPS {
            FbmMethod::Cholesky
        } else {
            FbmMethod::DaviesHarte
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbmParams {
    pub hurst: f64,
    pub n_steps: usize,
    pub horizon: f64,
    pub method: FbmMethod,
}

impl FbmParams {
    pub fn new(hurst: f64, n_steps: usize, horizon: f64, method: FbmMethod) -> Result<Self, DriverError> {
        let p = Self {
            hurst,
            n_steps,
            horizon,
            method,
        };
        p.validate()?;
        Ok(p)
    }

    /// Driver admissibility: the Hölder driver needs `H` in `(1/2, 1)`.
    pub fn validate(&self) -> Result<(), DriverError> {
        if !(self.hurst > 0.5) {
            return Err(DriverError::InvalidParam("hurst must exceed 1/2".into()));
        }
        if !(self.hurst < 1.0) {
            return Err(DriverError::InvalidParam("hurst must be below 1".into()));
        }
        self.validate_grid()
    }

    fn validate_grid(&self) -> Result<(), DriverError> {
        if self.n_steps < 2 {
            return Err(DriverError::InvalidParam("n_steps must be at least 2".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(DriverError::InvalidParam("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }
}

/// `(master_seed, stream_index)` addressing one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Independent generator for one consumer (`channel`) within this stream.
    pub fn rng(&self, channel: u64) -> ChaCha8Rng {
        let key = splitmix64(self.master_seed ^ splitmix64(channel));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(self.stream_index);
        rng
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub(crate) fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `Cov(B^H(s), B^H(t)) = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64, DriverError> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(DriverError::InvalidParam(format!("hurst {hurst} outside (0, 1)")));
    }
    if !(s >= 0.0 && t >= 0.0) {
        return Err(DriverError::InvalidParam(format!("times must be non-negative, got ({s}, {t})")));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2)))
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(k: usize, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

#[derive(Debug, Clone)]
enum Engine {
    Cholesky(ToeplitzCholesky),
    Circulant(CirculantEmbedding),
}

/// Precomputed fBm sampler for one `(H, n, T, method)`.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    params: FbmParams,
    engine: Engine,
}

impl FbmSampler {
    pub fn new(params: FbmParams) -> Result<Self, DriverError> {
        params.validate()?;
        Self::build(params)
    }

    /// Accepts any `H` in `(0, 1)`; used for Brownian (`H = 1/2`) reference runs.
    pub fn with_any_hurst(params: FbmParams) -> Result<Self, DriverError> {
        if !(params.hurst > 0.0 && params.hurst < 1.0) {
            return Err(DriverError::InvalidParam(format!("hurst {} outside (0, 1)", params.hurst)));
        }
        params.validate_grid()?;
        Self::build(params)
    }

    fn build(params: FbmParams) -> Result<Self, DriverError> {
        let engine = match params.method {
            FbmMethod::Cholesky => Engine::Cholesky(ToeplitzCholesky::fgn(params.n_steps, params.hurst)?),
            FbmMethod::DaviesHarte => Engine::Circulant(CirculantEmbedding::fgn(params.n_steps, params.hurst)?),
        };
        Ok(Self { params, engine })
    }

    pub fn params(&self) -> &FbmParams {
        &self.params
    }

    /// One scalar path on `{0, dt, ..., T}` starting at zero.
    pub fn sample(&self, seed: SeedSpec) -> GridPath {
        self.sample_channel(seed, CHANNEL_FBM)
    }

    /// `dim` independent coordinates stacked into one path.
    pub fn sample_multi(&self, seed: SeedSpec, dim: usize) -> GridPath {
        let n = self.params.n_steps;
        let mut values = vec![0.0; (n + 1) * dim];
        for j in 0..dim {
            let coord = self.sample_channel(seed, CHANNEL_FBM + j as u64);
            for k in 0..=n {
                values[k * dim + j] = coord.value(k);
            }
        }
        GridPath::new(0.0, self.params.dt(), dim, values).expect("valid grid")
    }

    fn sample_channel(&self, seed: SeedSpec, channel: u64) -> GridPath {
        let mut rng = seed.rng(channel);
        let noise = match &self.engine {
            Engine::Cholesky(c) => c.apply(&standard_normals(&mut rng, self.params.n_steps)),
            Engine::Circulant(c) => c.sample(&mut rng),
        };
        let scale = self.params.dt().powf(self.params.hurst);
        let mut values = Vec::with_capacity(noise.len() + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for x in noise {
            acc += x;
            values.push(acc * scale);
        }
        GridPath::scalar(0.0, self.params.dt(), values).expect("valid grid")
    }
}

/// One scalar fBm path; see [`FbmSampler`] for repeated sampling.
pub fn sample_fbm(params: FbmParams, seed: SeedSpec) -> Result<GridPath, DriverError> {
    Ok(FbmSampler::new(params)?.sample(seed))
}

/// Standard Wiener path in `R^dim` on `{0, T/n, ..., T}`.
pub fn sample_wiener(n_steps: usize, horizon: f64, dim: usize, seed: SeedSpec) -> Result<GridPath, DriverError> {
    if n_steps < 1 {
        return Err(DriverError::InvalidParam("n_steps must be at least 1".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(DriverError::InvalidParam("horizon must be positive".into()));
    }
    if dim < 1 {
        return Err(DriverError::InvalidParam("dim must be at least 1".into()));
    }
    let dt = horizon / n_steps as f64;
    let sd = dt.sqrt();
    let mut rng = seed.rng(CHANNEL_WIENER);
    let mut values = vec![0.0; (n_steps + 1) * dim];
    for k in 1..=n_steps {
        for j in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            values[k * dim + j] = values[(k - 1) * dim + j] + sd * z;
        }
    }
    Ok(GridPath::new(0.0, dt, dim, values)?)
}

/// Grid Hölder seminorm `max_{x<y} |f(y) - f(x)| / (y - x)^lambda` over the
/// nodes inside `window` (the whole path when `None`).
pub fn holder_seminorm(path: &GridPath, lambda: f64, window: Option<(f64, f64)>) -> Result<f64, DriverError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(DriverError::InvalidParam(format!("lambda {lambda} outside (0, 1]")));
    }
    let (from, to) = match window {
        None => (0, path.len() - 1),
        Some((a, b)) => node_range(path, a, b),
    };
    if to <= from || to >= path.len() {
        return Err(DriverError::EmptyWindow);
    }
    let lag_pow: Vec<f64> = (0..=to - from)
        .map(|j| (j as f64 * path.dt()).powf(lambda))
        .collect();
    let mut best: f64 = 0.0;
    for i in from..to {
        for j in i + 1..=to {
            let ratio = path.node_distance(i, j) / lag_pow[j - i];
            if ratio > best {
                best = ratio;
            }
        }
    }
    Ok(best)
}

/// Nodes with time in `[a, b]` (inclusive, with alignment slack).
fn node_range(path: &GridPath, a: f64, b: f64) -> (usize, usize) {
    let eps = crate::path::GRID_ALIGN_TOL;
    let lo = ((a - path.t0()) / path.dt() - eps).ceil().max(0.0) as usize;
    let hi_f = ((b - path.t0()) / path.dt() + eps).floor();
    if hi_f < 0.0 {
        return (1, 0);
    }
    let hi = (hi_f as usize).min(path.len() - 1);
    (lo, hi)
}
