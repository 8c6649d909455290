//! The smooth approximation `Z^N(t) = N \int_{(t-1/N) v 0}^t h_N(Z(s)) ds` of a driver,
//! with `h_N(x) = x` for `|x| <= N` and `N x / |x|` otherwise.

use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::path::{euclid, GridPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierParams {
    pub level: usize,
}

impl MollifierParams {
    pub fn new(level: usize) -> Result<Self, SolverError> {
        if level == 0 {
            return Err(SolverError::Config("mollifier level must be at least 1".into()));
        }
        Ok(Self { level })
    }

    pub fn window(&self) -> f64 {
        1.0 / self.level as f64
    }

    /// Lipschitz bound `2 N^2` of the mollified path.
    pub fn lipschitz_bound(&self) -> f64 {
        2.0 * (self.level as f64).powi(2)
    }

    pub(crate) fn check_grid(&self, dt: f64) -> Result<(), SolverError> {
        if dt > self.window() / 4.0 * (1.0 + 1e-12) {
            return Err(SolverError::TooCoarse { dt, level: self.level });
        }
        Ok(())
    }
}

/// `h_N` applied in place (Euclidean clamp to the ball of radius `N`).
#[inline]
pub fn clamp_norm(x: &mut [f64], level: f64) {
    let n = euclid(x);
    if n > level {
        let s = level / n;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// `Z^N` on the grid of `z`; `z` must start at time 0 and satisfy `dt <= 1/(4N)`.
///
/// `h_N(Z)` is integrated by the trapezoid rule; the lower window end
/// `t - 1/N` generally falls inside a cell, which is integrated exactly against
/// the linear interpolant.
pub fn mollify_driver(z: &GridPath, params: MollifierParams) -> Result<GridPath, SolverError> {
    params.check_grid(z.dt())?;
    if z.t0().abs() > crate::path::GRID_ALIGN_TOL * z.dt() {
        return Err(SolverError::Config(format!("driver must start at 0, starts at {}", z.t0())));
    }
    let (d, dt, n) = (z.dim(), z.dt(), z.len());
    let level = params.level as f64;
    let mut clamped = z.values().to_vec();
    for node in clamped.chunks_exact_mut(d) {
        clamp_norm(node, level);
    }
    // cumulative trapezoid integral H(t_k) of h_N(Z)
    let mut cumulative = vec![0.0; n * d];
    for k in 1..n {
        for j in 0..d {
            cumulative[k * d + j] = cumulative[(k - 1) * d + j] + 0.5 * dt * (clamped[(k - 1) * d + j] + clamped[k * d + j]);
        }
    }
    let window = params.window();
    let mut out = vec![0.0; n * d];
    for k in 0..n {
        let t = k as f64 * dt;
        let lower = t - window;
        for j in 0..d {
            let upper = cumulative[k * d + j];
            let below = if lower <= 0.0 {
                0.0
            } else {
                let pos = lower / dt;
                let i = (pos.floor() as usize).min(n - 2);
                let frac = pos - i as f64;
                let y0 = clamped[i * d + j];
                let y1 = clamped[(i + 1) * d + j];
                let y_low = y0 + frac * (y1 - y0);
                cumulative[i * d + j] + 0.5 * frac * dt * (y0 + y_low)
            };
            out[k * d + j] = level * (upper - below);
        }
    }
    Ok(GridPath::new(0.0, dt, d, out)?)
}

/// `dZ^N/dt (t) = N (h_N(Z(t)) - h_N(Z((t - 1/N) v 0)))`, reading `z` by linear interpolation.
pub fn mollifier_rate(z: &GridPath, params: MollifierParams, t: f64, out: &mut [f64]) -> Result<(), SolverError> {
    let level = params.level as f64;
    let mut lagged = vec![0.0; z.dim()];
    z.interpolate(t, out)?;
    z.interpolate((t - params.window()).max(0.0), &mut lagged)?;
    clamp_norm(out, level);
    clamp_norm(&mut lagged, level);
    for (o, l) in out.iter_mut().zip(&lagged) {
        *o = level * (*o - l);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{FbmMethod, FbmParams, FbmSampler, SeedSpec};

    #[test]
    fn constant_driver_is_reproduced_after_one_window() {
        let z = GridPath::on_interval(0.0, 1.0, 256, |_| 0.7).unwrap();
        let p = MollifierParams::new(8).unwrap();
        let zn = mollify_driver(&z, p).unwrap();
        for k in 32..=256 {
            assert!((zn.value(k) - 0.7).abs() < 1e-12);
        }
        assert_eq!(zn.value(0), 0.0);
    }

    #[test]
    fn linear_driver_is_shifted_by_half_a_window() {
        let n = 1000;
        let z = GridPath::on_interval(0.0, 1.0, 1024, |t| t).unwrap();
        let zn = mollify_driver(&z, MollifierParams::new(n / 4).unwrap()).unwrap();
        let p = MollifierParams::new(16).unwrap();
        let zn16 = mollify_driver(&z, p).unwrap();
        for k in 64..=1024 {
            let t = zn16.time(k);
            assert!((zn16.value(k) - (t - 1.0 / 32.0)).abs() < 1e-12, "t={t}");
        }
        // off-node window start (1/250 is not a multiple of the step)
        for k in 5..=1024 {
            let t = zn.time(k);
            assert!((zn.value(k) - (t - 0.5 / 250.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_driver_is_clamped() {
        let z = GridPath::on_interval(0.0, 1.0, 128, |_| 8.0).unwrap();
        let zn = mollify_driver(&z, MollifierParams::new(4).unwrap()).unwrap();
        for k in 32..=128 {
            assert!((zn.value(k) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let z = GridPath::on_interval(0.0, 1.0, 16, |t| t).unwrap();
        assert_eq!(
            mollify_driver(&z, MollifierParams::new(8).unwrap()),
            Err(SolverError::TooCoarse { dt: 1.0 / 16.0, level: 8 })
        );
        assert!(MollifierParams::new(0).is_err());
    }

    #[test]
    fn mollified_fbm_is_lipschitz_and_converges() {
        let n = 1 << 12;
        let sampler = FbmSampler::new(FbmParams::new(0.75, n, 1.0, FbmMethod::Cholesky).unwrap()).unwrap();
        for seed in 0..10 {
            let z = sampler.sample(SeedSpec::new(99, seed));
            let mut prev = f64::INFINITY;
            for level in [4usize, 16, 64] {
                let p = MollifierParams::new(level).unwrap();
                let zn = mollify_driver(&z, p).unwrap();
                let lip = (1..zn.len()).map(|k| (zn.value(k) - zn.value(k - 1)).abs() / zn.dt()).fold(0.0, f64::max);
                assert!(lip <= p.lipschitz_bound());
                let from = zn.index_of(p.window()).unwrap();
                let err = (from..zn.len()).map(|k| (zn.value(k) - z.value(k)).abs()).fold(0.0, f64::max);
                assert!(err < prev, "seed {seed} level {level}: {err} >= {prev}");
                prev = err;
            }
        }
    }

    #[test]
    fn rate_matches_difference_quotient() {
        let z = GridPath::on_interval(0.0, 1.0, 1024, |t| (3.0 * t).sin()).unwrap();
        let p = MollifierParams::new(16).unwrap();
        let zn = mollify_driver(&z, p).unwrap();
        let mut rate = [0.0];
        let k = 500;
        mollifier_rate(&z, p, z.time(k), &mut rate).unwrap();
        let fd = (zn.value(k + 1) - zn.value(k - 1)) / (2.0 * zn.dt());
        assert!((rate[0] - fd).abs() < 1e-3, "{} vs {fd}", rate[0]);
    }
}
