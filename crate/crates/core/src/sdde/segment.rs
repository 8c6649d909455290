use crate::path::{euclid, GridPath, GRID_ALIGN_TOL};

use super::SddeError;

/// The window `psi(u) = xi(t + u)`, `u in [-r, 0]`, borrowed from a path buffer.
///
/// Node `0` of the view is `u = -r`; the last node is `u = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    values: &'a [f64],
    dim: usize,
    dt: f64,
    anchor: f64,
}

impl<'a> Segment<'a> {
    /// `values` holds the nodes `t - r, ..., t` row-major with stride `dim`.
    pub fn from_slice(values: &'a [f64], dim: usize, dt: f64, anchor: f64) -> Result<Self, SddeError> {
        if dim == 0 || values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(SddeError::Dimension {
                what: "segment buffer",
                expected: dim,
                got: values.len(),
            });
        }
        Ok(Self { values, dim, dt, anchor })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time `t` the segment is taken at.
    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.dim
    }

    /// Delay horizon `r`.
    pub fn delay(&self) -> f64 {
        (self.n_nodes() - 1) as f64 * self.dt
    }

    /// `psi(0)`.
    #[inline]
    pub fn current(&self) -> &'a [f64] {
        self.lagged(0)
    }

    /// `psi(-k dt)`; `k` must not exceed the number of steps in the window.
    #[inline]
    pub fn lagged(&self, k: usize) -> &'a [f64] {
        let i = self.n_nodes() - 1 - k;
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Number of grid steps corresponding to the lag `tau`, which must be aligned and `<= r`.
    pub fn lag_steps(&self, tau: f64) -> Result<usize, SddeError> {
        lag_steps(tau, self.dt, self.n_nodes() - 1)
    }

    /// `psi(u)` at an aligned `u in [-r, 0]`.
    pub fn at(&self, u: f64) -> Result<&'a [f64], SddeError> {
        Ok(self.lagged(self.lag_steps(-u)?))
    }

    /// Node `i` counted from `u = -r`.
    #[inline]
    pub fn node(&self, i: usize) -> &'a [f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `||psi||_C`, the maximum Euclidean norm over the window.
    pub fn sup_norm(&self) -> f64 {
        self.values.chunks_exact(self.dim).map(euclid).fold(0.0, f64::max)
    }

    /// Copy of the window as a path on `[-r, 0]`.
    pub fn to_path(&self) -> GridPath {
        GridPath::new(-self.delay(), self.dt, self.dim, self.values.to_vec()).expect("segment buffer is valid")
    }
}

pub(crate) fn lag_steps(tau: f64, dt: f64, max_steps: usize) -> Result<usize, SddeError> {
    let pos = tau / dt;
    let k = pos.round();
    if !(tau >= 0.0) || (pos - k).abs() > GRID_ALIGN_TOL {
        return Err(SddeError::NotAligned { lag: tau, dt });
    }
    let k = k as usize;
    if k > max_steps {
        return Err(SddeError::LagExceedsDelay {
            lag: tau,
            delay: max_steps as f64 * dt,
        });
    }
    Ok(k)
}

/// The segment of `path` at time `t` with delay horizon `r`; `t` and `r` must be grid aligned.
pub fn segment_at(path: &GridPath, t: f64, r: f64) -> Result<Segment<'_>, SddeError> {
    let end = path.index_of(t)?;
    let steps = lag_steps(r, path.dt(), end).map_err(|e| match e {
        SddeError::LagExceedsDelay { .. } => SddeError::Path(crate::path::PathError::OutOfRange {
            t: t - r,
            start: path.t0(),
            end: path.t_end(),
        }),
        other => other,
    })?;
    let dim = path.dim();
    let start = end - steps;
    Segment::from_slice(&path.values()[start * dim..(end + 1) * dim], dim, path.dt(), t)
}
