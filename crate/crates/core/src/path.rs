//! Uniform-grid sample paths.
//!
//! [`GridPath`] is the single carrier for every trajectory in the crate: the
//! Wiener driver `W`, the Hölder driver `Z`, initial segments and solutions.
//! Node `k` lives at time `t0 + k * dt`; values are stored row-major with
//! stride `dim`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance (in units of `dt`) for deciding that a time sits on a node.
pub const GRID_ALIGN_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("path must contain at least one node")]
    Empty,
    #[error("dimension must be positive")]
    ZeroDim,
    #[error("value buffer of length {len} is not a multiple of dim {dim}")]
    Ragged { len: usize, dim: usize },
    #[error("time step must be finite and positive, got {0}")]
    BadStep(f64),
    #[error("time {t} is outside the path range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("time {t} is not on a grid node (dt = {dt})")]
    NotAligned { t: f64, dt: f64 },
    #[error("restriction factor {factor} does not divide {steps} steps")]
    BadRestriction { factor: usize, steps: usize },
    #[error("grids are incompatible: {0}")]
    Incompatible(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    t0: f64,
    dt: f64,
    dim: usize,
    values: Vec<f64>,
}

impl GridPath {
    pub fn new(t0: f64, dt: f64, dim: usize, values: Vec<f64>) -> Result<Self, PathError> {
        if dim == 0 {
            return Err(PathError::ZeroDim);
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(PathError::BadStep(dt));
        }
        if values.is_empty() {
            return Err(PathError::Empty);
        }
        if !values.len().is_multiple_of(dim) {
            return Err(PathError::Ragged {
                len: values.len(),
                dim,
            });
        }
        Ok(Self {
            t0,
            dt,
            dim,
            values,
        })
    }

    pub fn scalar(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self, PathError> {
        Self::new(t0, dt, 1, values)
    }

    /// Samples a scalar function on `n_nodes` nodes starting at `t0`.
    pub fn from_fn(t0: f64, dt: f64, n_nodes: usize, f: impl Fn(f64) -> f64) -> Result<Self, PathError> {
        let values = (0..n_nodes).map(|k| f(t0 + k as f64 * dt)).collect();
        Self::scalar(t0, dt, values)
    }

    /// Scalar function sampled on `n_steps + 1` nodes covering `[a, b]`.
    pub fn on_interval(a: f64, b: f64, n_steps: usize, f: impl Fn(f64) -> f64) -> Result<Self, PathError> {
        let dt = (b - a) / n_steps as f64;
        Self::from_fn(a, dt, n_steps + 1, f)
    }

    pub fn constant(t0: f64, dt: f64, n_nodes: usize, value: &[f64]) -> Result<Self, PathError> {
        let mut values = Vec::with_capacity(n_nodes * value.len());
        for _ in 0..n_nodes {
            values.extend_from_slice(value);
        }
        Self::new(t0, dt, value.len(), values)
    }

    #[inline]
    pub fn t0(&self) -> f64 {
        self.t0
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes.
    #[inline]
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.len() - 1
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    #[inline]
    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn node_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// First coordinate of node `k`; the common accessor for scalar paths.
    #[inline]
    pub fn value(&self, k: usize) -> f64 {
        self.values[k * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.dim).copied().collect()
    }

    pub fn coordinate_path(&self, j: usize) -> GridPath {
        GridPath {
            t0: self.t0,
            dt: self.dt,
            dim: 1,
            values: self.coordinate(j),
        }
    }

    /// Stacks scalar paths on a common grid into one multi-dimensional path.
    pub fn stack(parts: &[GridPath]) -> Result<Self, PathError> {
        let first = parts.first().ok_or(PathError::Empty)?;
        for p in parts {
            if p.len() != first.len() || p.t0 != first.t0 || p.dt != first.dt {
                return Err(PathError::Incompatible("stacked paths differ in grid".into()));
            }
        }
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let mut values = Vec::with_capacity(dim * first.len());
        for k in 0..first.len() {
            for p in parts {
                values.extend_from_slice(p.node(k));
            }
        }
        Self::new(first.t0, first.dt, dim, values)
    }

    /// Index of the node at time `t`, which must be grid aligned.
    pub fn index_of(&self, t: f64) -> Result<usize, PathError> {
        let pos = (t - self.t0) / self.dt;
        let k = pos.round();
        if (pos - k).abs() > GRID_ALIGN_TOL {
            return Err(PathError::NotAligned { t, dt: self.dt });
        }
        if k < 0.0 || k as usize >= self.len() {
            return Err(PathError::OutOfRange {
                t,
                start: self.t0,
                end: self.t_end(),
            });
        }
        Ok(k as usize)
    }

    /// Keeps every `factor`-th node (coarsening for coupled dyadic grids).
    pub fn restrict(&self, factor: usize) -> Result<Self, PathError> {
        if factor == 0 || !self.n_steps().is_multiple_of(factor) {
            return Err(PathError::BadRestriction {
                factor,
                steps: self.n_steps(),
            });
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let mut values = Vec::with_capacity(self.dim * (self.n_steps() / factor + 1));
        for k in (0..self.len()).step_by(factor) {
            values.extend_from_slice(self.node(k));
        }
        Self::new(self.t0, self.dt * factor as f64, self.dim, values)
    }

    /// Restricts to a grid with step `target_dt`, which must be an integer multiple of `dt`.
    pub fn restrict_to_step(&self, target_dt: f64) -> Result<Self, PathError> {
        let ratio = target_dt / self.dt;
        let factor = ratio.round();
        if factor < 1.0 || (ratio - factor).abs() > GRID_ALIGN_TOL * ratio.max(1.0) {
            return Err(PathError::Incompatible(format!(
                "step {target_dt} is not a multiple of {}",
                self.dt
            )));
        }
        self.restrict(factor as usize)
    }

    /// Sub-path over node indices `from..=to`.
    pub fn slice_nodes(&self, from: usize, to: usize) -> Result<Self, PathError> {
        if from > to || to >= self.len() {
            return Err(PathError::OutOfRange {
                t: self.time(to),
                start: self.t0,
                end: self.t_end(),
            });
        }
        Self::new(
            self.time(from),
            self.dt,
            self.dim,
            self.values[from * self.dim..(to + 1) * self.dim].to_vec(),
        )
    }

    /// Sub-path over the aligned time window `[a, b]`.
    pub fn window(&self, a: f64, b: f64) -> Result<Self, PathError> {
        let i = self.index_of(a)?;
        let j = self.index_of(b)?;
        self.slice_nodes(i, j)
    }

    /// Linear interpolation between nodes; only used for reading off-node times.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) -> Result<(), PathError> {
        let end = self.t_end();
        let slack = GRID_ALIGN_TOL * self.dt;
        if t < self.t0 - slack || t > end + slack {
            return Err(PathError::OutOfRange {
                t,
                start: self.t0,
                end,
            });
        }
        let pos = ((t - self.t0) / self.dt).clamp(0.0, self.n_steps() as f64);
        let k = (pos.floor() as usize).min(self.n_steps().saturating_sub(1));
        let w = pos - k as f64;
        if self.len() == 1 {
            out.copy_from_slice(self.node(0));
            return Ok(());
        }
        let (lo, hi) = (self.node(k), self.node(k + 1));
        for ((o, &l), &h) in out.iter_mut().zip(lo).zip(hi) {
            *o = l + w * (h - l);
        }
        Ok(())
    }

    pub fn interpolate_scalar(&self, t: f64) -> Result<f64, PathError> {
        let mut out = vec![0.0; self.dim];
        self.interpolate(t, &mut out)?;
        Ok(out[0])
    }

    /// Euclidean norm of node `k`.
    #[inline]
    pub fn node_norm(&self, k: usize) -> f64 {
        euclid(self.node(k))
    }

    /// Euclidean distance between nodes `i` and `j`.
    #[inline]
    pub fn node_distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.node(i), self.node(j));
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|k| self.node_norm(k)).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            dim: self.dim,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise `self + other` on an identical grid.
    pub fn add(&self, other: &GridPath) -> Result<Self, PathError> {
        self.check_same_grid(other)?;
        Ok(Self {
            t0: self.t0,
            dt: self.dt,
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn check_same_grid(&self, other: &GridPath) -> Result<(), PathError> {
        if self.len() != other.len() || self.dim != other.dim {
            return Err(PathError::Incompatible(format!(
                "{}x{} vs {}x{} nodes",
                self.len(),
                self.dim,
                other.len(),
                other.dim
            )));
        }
        if (self.t0 - other.t0).abs() > GRID_ALIGN_TOL * self.dt
            || (self.dt - other.dt).abs() > GRID_ALIGN_TOL * self.dt
        {
            return Err(PathError::Incompatible("different time grids".into()));
        }
        Ok(())
    }
}

#[inline]
pub fn euclid(v: &[f64]) -> f64 {
    if v.len() == 1 {
        return v[0].abs();
    }
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sup over `[from, to]` of the Euclidean distance between two paths, read on the
/// nodes of the coarser grid. The finer grid must refine the coarser one.
pub fn sup_distance(x: &GridPath, y: &GridPath, from: f64, to: f64) -> Result<f64, PathError> {
    if x.dim() != y.dim() {
        return Err(PathError::Incompatible("dimension mismatch".into()));
    }
    let (coarse, fine) = if x.dt() >= y.dt() { (x, y) } else { (y, x) };
    let start = coarse.index_of(from)?;
    let end = coarse.index_of(to)?;
    let mut worst: f64 = 0.0;
    for k in start..=end {
        let j = fine.index_of(coarse.time(k))?;
        let d = coarse
            .node(k)
            .iter()
            .zip(fine.node(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(d);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_times_follow_grid() {
        let p = GridPath::from_fn(-1.0, 0.25, 9, |t| t).unwrap();
        assert_eq!(p.len(), 9);
        assert_eq!(p.time(4), 0.0);
        assert_eq!(p.index_of(0.5).unwrap(), 6);
        assert!(p.index_of(0.1).is_err());
        assert!(p.index_of(3.0).is_err());
    }

    #[test]
    fn restriction_keeps_common_nodes() {
        let p = GridPath::from_fn(0.0, 0.125, 9, |t| t * t).unwrap();
        let q = p.restrict(4).unwrap();
        assert_eq!(q.len(), 3);
        assert_eq!(q.value(1), p.value(4));
        assert!(p.restrict(3).is_err());
        assert_eq!(p.restrict_to_step(0.25).unwrap().len(), 5);
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(GridPath::new(0.0, 0.1, 2, vec![1.0, 2.0, 3.0]), Err(PathError::Ragged { len: 3, dim: 2 }));
        assert_eq!(GridPath::new(0.0, 0.0, 1, vec![1.0]), Err(PathError::BadStep(0.0)));
        assert_eq!(GridPath::new(0.0, 0.1, 1, vec![]), Err(PathError::Empty));
    }

    #[test]
    fn interpolation_is_linear_between_nodes() {
        let p = GridPath::from_fn(0.0, 0.5, 3, |t| 2.0 * t).unwrap();
        assert!((p.interpolate_scalar(0.3).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(p.interpolate_scalar(1.0).unwrap(), 2.0);
    }

    #[test]
    fn sup_distance_across_grids() {
        let fine = GridPath::from_fn(0.0, 0.25, 5, |t| t).unwrap();
        let coarse = GridPath::from_fn(0.0, 0.5, 3, |t| t + if t > 0.9 { 0.5 } else { 0.0 }).unwrap();
        assert_eq!(sup_distance(&fine, &coarse, 0.0, 1.0).unwrap(), 0.5);
        assert_eq!(sup_distance(&fine, &coarse, 0.0, 0.5).unwrap(), 0.0);
    }
}
