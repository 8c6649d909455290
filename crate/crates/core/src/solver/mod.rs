//! Time stepping on the uniform grid `t_k = k delta`, `delta = T / n`.
//!
//! Every scheme stores the solution on `[-r, T]` in one buffer whose first
//! `r / delta + 1` nodes are the initial segment, so the segment at `t_k` is a
//! contiguous window of the buffer.

mod ito;
mod mollifier;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path::{GridPath, PathError};
use crate::sdde::{CoefficientSpec, InitialCondition, SddeError, Segment};

pub use ito::{euler_ito_sdde, AdaptedView, MollifiedDrift, RandomCoefficient, SpecDiffusion, SpecDrift};
pub use mollifier::{clamp_norm, mollifier_rate, mollify_driver, MollifierParams};

pub const DEFAULT_EXPLOSION_THRESHOLD: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("solution exploded at t = {time}: |X| = {value:e} exceeds {threshold:e}")]
    Explosion { time: f64, value: f64, threshold: f64 },
    #[error("evaluator at t = {now} requested driver values at t = {requested}")]
    Adaptedness { requested: f64, now: f64 },
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("grid step {dt} is too coarse for mollifier level {level} (need dt <= 1/(4N))")]
    TooCoarse { dt: f64, level: usize },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Sdde(#[from] SddeError),
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMixed,
    EulerIto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub n_steps: usize,
    pub horizon: f64,
    #[serde(default = "default_threshold")]
    pub explosion_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_EXPLOSION_THRESHOLD
}

impl SolverConfig {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self, SolverError> {
        let cfg = Self {
            n_steps,
            horizon,
            explosion_threshold: DEFAULT_EXPLOSION_THRESHOLD,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.n_steps == 0 {
            return Err(SolverError::Config("n_steps must be positive".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(SolverError::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.explosion_threshold > 0.0) {
            return Err(SolverError::Config("explosion threshold must be positive".into()));
        }
        Ok(())
    }

    /// `delta = T / n`.
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.horizon / self.n_steps as f64
    }
}

/// `driver` restricted to `{0, delta, ..., T}`; it may live on a finer grid that refines it.
pub(crate) fn driver_on_grid(driver: &GridPath, cfg: &SolverConfig, dim: usize, what: &'static str) -> Result<GridPath, SolverError> {
    if driver.dim() != dim {
        return Err(SolverError::Dimension {
            what,
            expected: dim,
            got: driver.dim(),
        });
    }
    let window = driver.window(0.0, cfg.horizon)?;
    Ok(window.restrict_to_step(cfg.dt())?)
}

/// Solution buffer pre-filled with the initial segment on the solver grid.
pub(crate) struct History {
    pub values: Vec<f64>,
    pub dim: usize,
    pub lag_steps: usize,
    pub dt: f64,
}

impl History {
    pub fn new(spec_delay: f64, dim: usize, eta: &InitialCondition, cfg: &SolverConfig) -> Result<Self, SolverError> {
        if eta.dim() != dim {
            return Err(SolverError::Dimension {
                what: "initial condition",
                expected: dim,
                got: eta.dim(),
            });
        }
        let dt = cfg.dt();
        let lag_steps = {
            let pos = spec_delay / dt;
            let k = pos.round();
            if (pos - k).abs() > crate::path::GRID_ALIGN_TOL {
                return Err(SddeError::NotAligned { lag: spec_delay, dt }.into());
            }
            k as usize
        };
        if eta.delay() + crate::path::GRID_ALIGN_TOL * dt < spec_delay {
            return Err(SolverError::Config(format!(
                "initial condition covers [-{}, 0] but the delay is {spec_delay}",
                eta.delay()
            )));
        }
        let eta_path = eta.path();
        let on_grid = if eta_path.len() == 1 || (eta_path.dt() - dt).abs() <= crate::path::GRID_ALIGN_TOL * dt {
            eta_path.clone()
        } else if let Ok(p) = eta_path.restrict_to_step(dt) {
            p
        } else {
            eta.resampled(dt)?.path().clone()
        };
        let mut values = vec![0.0; (lag_steps + cfg.n_steps + 1) * dim];
        if on_grid.len() == 1 {
            for k in 0..=lag_steps {
                values[k * dim..(k + 1) * dim].copy_from_slice(on_grid.node(0));
            }
        } else {
            let start = on_grid.index_of(-(lag_steps as f64) * dt)?;
            values[..(lag_steps + 1) * dim].copy_from_slice(&on_grid.values()[start * dim..]);
        }
        Ok(Self {
            values,
            dim,
            lag_steps,
            dt,
        })
    }

    /// Segment at solver step `k`, together with the slot for node `k + 1`.
    #[inline]
    pub fn split(&mut self, k: usize) -> (Segment<'_>, &mut [f64]) {
        let d = self.dim;
        let end = (k + self.lag_steps + 1) * d;
        let (past, future) = self.values.split_at_mut(end);
        let seg = Segment::from_slice(&past[k * d..], d, self.dt, k as f64 * self.dt).expect("history window is valid");
        (seg, &mut future[..d])
    }

    pub fn into_path(self) -> Result<GridPath, SolverError> {
        let t0 = -(self.lag_steps as f64) * self.dt;
        Ok(GridPath::new(t0, self.dt, self.dim, self.values)?)
    }
}

#[inline]
pub(crate) fn guard(next: &[f64], time: f64, threshold: f64) -> Result<(), SolverError> {
    for &v in next {
        if !(v.abs() <= threshold) {
            return Err(SolverError::Explosion {
                time,
                value: v.abs(),
                threshold,
            });
        }
    }
    Ok(())
}

/// Euler scheme for the mixed equation:
/// `X(t_{k+1}) = X(t_k) + a delta + sum_i b_i dW_i + sum_j c_j dZ_j`, with every
/// coefficient evaluated at `(t_k, X_{t_k})`.
///
/// `w` and `z` start at time 0 and live on the solver grid or on a grid refining it.
/// The result covers `[-r, T]` and equals `eta` on `[-r, 0]`.
pub fn euler_mixed_sdde(
    spec: &CoefficientSpec,
    eta: &InitialCondition,
    w: &GridPath,
    z: &GridPath,
    cfg: &SolverConfig,
) -> Result<GridPath, SolverError> {
    spec.validate()?;
    cfg.validate()?;
    let (d, m, l) = (spec.dim, spec.n_wiener(), spec.n_fractional());
    let w = driver_on_grid(w, cfg, m.max(1), "Wiener driver")?;
    let z = driver_on_grid(z, cfg, l.max(1), "Hölder driver")?;
    let mut hist = History::new(spec.delay, d, eta, cfg)?;
    {
        let (seg, _) = hist.split(0);
        spec.check_segment(&seg)?;
    }
    let dt = cfg.dt();
    let (mut a, mut b, mut c) = (vec![0.0; d], vec![0.0; d * m], vec![0.0; d * l]);
    let mut incr = vec![0.0; d];
    for k in 0..cfg.n_steps {
        let t = cfg.time(k);
        let (seg, next) = hist.split(k);
        spec.drift_into(t, &seg, &mut a);
        spec.diffusion_into(t, &seg, &mut b);
        spec.fractional_into(t, &seg, &mut c);
        for (x, ax) in incr.iter_mut().zip(&a) {
            *x = ax * dt;
        }
        let (w0, w1) = (w.node(k), w.node(k + 1));
        for i in 0..m {
            let dw = w1[i] - w0[i];
            for (x, bx) in incr.iter_mut().zip(&b[i * d..(i + 1) * d]) {
                *x += bx * dw;
            }
        }
        let (z0, z1) = (z.node(k), z.node(k + 1));
        for j in 0..l {
            let dz = z1[j] - z0[j];
            for (x, cx) in incr.iter_mut().zip(&c[j * d..(j + 1) * d]) {
                *x += cx * dz;
            }
        }
        let cur = seg.current();
        for ((n, x), dx) in next.iter_mut().zip(cur).zip(&incr) {
            *n = x + dx;
        }
        guard(next, cfg.time(k + 1), cfg.explosion_threshold)?;
    }
    hist.into_path()
}

/// `x0 exp((a - b^2/2) t + b W(t) + c Z(t))`, the solution of the scalar
/// equation `dX = a X dt + b X dW + c X dZ`, evaluated on the common grid of `W` and `Z`.
pub fn geometric_closed_form(a: f64, b: f64, c: f64, x0: f64, w: &GridPath, z: &GridPath) -> Result<GridPath, SolverError> {
    for (p, what) in [(w, "Wiener driver"), (z, "Hölder driver")] {
        if p.dim() != 1 {
            return Err(SolverError::Dimension {
                what,
                expected: 1,
                got: p.dim(),
            });
        }
    }
    w.check_same_grid(z)?;
    let drift = a - 0.5 * b * b;
    let values = (0..w.len())
        .map(|k| x0 * (drift * w.time(k) + b * w.value(k) + c * z.value(k)).exp())
        .collect();
    Ok(GridPath::scalar(w.t0(), w.dt(), values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{sample_wiener, FbmMethod, FbmParams, FbmSampler, SeedSpec};
    use crate::path::sup_distance;
    use crate::sdde::{AffineMap, Family, Gain};

    fn drivers(n: usize, seed: u64) -> (GridPath, GridPath) {
        let s = SeedSpec::new(seed, 0);
        let w = sample_wiener(n, 1.0, 1, s).unwrap();
        let z = FbmSampler::new(FbmParams::new(0.75, n, 1.0, FbmMethod::Cholesky).unwrap())
            .unwrap()
            .sample(s);
        (w, z)
    }

    #[test]
    fn zero_coefficients_freeze_the_state() {
        let spec = CoefficientSpec::geometric(0.0, 0.0, 0.0);
        let eta = InitialCondition::constant(&[1.7], 0.0, 0.01).unwrap();
        let (w, z) = drivers(64, 1);
        let x = euler_mixed_sdde(&spec, &eta, &w, &z, &SolverConfig::new(64, 1.0).unwrap()).unwrap();
        assert!(x.values().iter().all(|&v| v == 1.7));
    }

    #[test]
    fn single_step_matches_recursion() {
        let (a, b, c) = (0.5, 0.4, 0.3);
        let spec = CoefficientSpec::geometric(a, b, c);
        let eta = InitialCondition::constant(&[1.0], 0.0, 1.0).unwrap();
        let (w, z) = drivers(8, 3);
        let cfg = SolverConfig::new(1, 1.0).unwrap();
        let x = euler_mixed_sdde(&spec, &eta, &w, &z, &cfg).unwrap();
        let expect = 1.0 + a + b * w.value(8) + c * z.value(8);
        assert!((x.value(1) - expect).abs() < 1e-15);
    }

    #[test]
    fn initial_segment_is_copied_bitwise() {
        let mut spec = CoefficientSpec::geometric(0.3, 0.2, 0.2);
        spec.family = Family::PointwiseDelay;
        spec.delay = 0.5;
        spec.drift = spec.drift.clone().with_tap(0.25, Gain::Scalar(0.3));
        let eta = GridPath::on_interval(-0.5, 0.0, 32, |t| (5.0 * t).cos()).unwrap();
        let ic = InitialCondition::new(eta.clone(), 1.0).unwrap();
        let (w, z) = drivers(256, 5);
        let x = euler_mixed_sdde(&spec, &ic, &w, &z, &SolverConfig::new(64, 1.0).unwrap()).unwrap();
        assert_eq!(x.t0(), -0.5);
        for k in 0..eta.len() {
            assert_eq!(x.value(k).to_bits(), eta.value(k).to_bits());
        }
        let again = euler_mixed_sdde(&spec, &ic, &w, &z, &SolverConfig::new(64, 1.0).unwrap()).unwrap();
        assert_eq!(x, again);
    }

    #[test]
    fn closed_form_examples() {
        let w = GridPath::on_interval(0.0, 1.0, 4, |_| 0.0).unwrap();
        let x = geometric_closed_form(1.0, 0.0, 0.0, 1.0, &w, &w).unwrap();
        assert!((x.value(4) - std::f64::consts::E).abs() < 1e-15);
        let z = GridPath::on_interval(0.0, 1.0, 4, |t| t.sin()).unwrap();
        let x = geometric_closed_form(0.0, 0.0, 1.0, 2.0, &w, &z).unwrap();
        for k in 0..5 {
            assert_eq!(x.value(k), 2.0 * z.value(k).exp());
        }
    }

    #[test]
    fn gbm_mean_matches_moment_formula() {
        let n_paths = 100_000;
        let z = GridPath::on_interval(0.0, 1.0, 1, |_| 0.0).unwrap();
        let samples: Vec<f64> = (0..n_paths)
            .map(|i| {
                let w = sample_wiener(1, 1.0, 1, SeedSpec::new(17, i)).unwrap();
                geometric_closed_form(0.5, 0.4, 0.0, 1.0, &w, &z).unwrap().value(1)
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n_paths as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_paths - 1) as f64;
        let se = (var / n_paths as f64).sqrt();
        assert!((mean - 0.5f64.exp()).abs() < 3.0 * se, "{mean} vs {}", 0.5f64.exp());
    }

    #[test]
    fn euler_tracks_closed_form() {
        let n = 1 << 10;
        let spec = CoefficientSpec::geometric(0.5, 0.4, 0.3);
        let eta = InitialCondition::constant(&[1.0], 0.0, 1.0).unwrap();
        let cfg = SolverConfig::new(n, 1.0).unwrap();
        let mut total = 0.0;
        for seed in 0..200 {
            let (w, z) = drivers(n, 1000 + seed);
            let x = euler_mixed_sdde(&spec, &eta, &w, &z, &cfg).unwrap();
            let exact = geometric_closed_form(0.5, 0.4, 0.3, 1.0, &w, &z).unwrap();
            total += sup_distance(&x, &exact, 0.0, 1.0).unwrap();
        }
        assert!(total / 200.0 < 0.05, "{}", total / 200.0);
    }

    #[test]
    fn explosion_is_reported() {
        let spec = CoefficientSpec::geometric(50.0, 0.0, 0.0);
        let eta = InitialCondition::constant(&[1.0], 0.0, 1.0).unwrap();
        let (w, z) = drivers(16, 0);
        let err = euler_mixed_sdde(&spec, &eta, &w, &z, &SolverConfig::new(16, 1.0).unwrap()).unwrap_err();
        assert!(matches!(err, SolverError::Explosion { .. }), "{err}");
    }

    #[test]
    fn coarser_driver_is_rejected() {
        let spec = CoefficientSpec::geometric(0.5, 0.4, 0.3);
        let eta = InitialCondition::constant(&[1.0], 0.0, 1.0).unwrap();
        let (w, z) = drivers(16, 0);
        assert!(euler_mixed_sdde(&spec, &eta, &w, &z, &SolverConfig::new(32, 1.0).unwrap()).is_err());
        let spec2 = CoefficientSpec {
            diffusion: vec![AffineMap::zero(), AffineMap::zero()],
            ..spec
        };
        assert!(matches!(
            euler_mixed_sdde(&spec2, &eta, &w, &z, &SolverConfig::new(16, 1.0).unwrap()),
            Err(SolverError::Dimension { .. })
        ));
    }
}
