//! Declarative coefficient families.
//!
//! Every coefficient `a`, `b_i`, `c_j` is an [`AffineMap`] from `(t, psi)` to `R^d`:
//!
//! ```text
//! m(t) * ( offset + A_0 psi(0) + sum_k A_k psi(-tau_k) + K \int_{-r}^0 w(u) psi(u) du )
//! ```
//!
//! which keeps linear-growth, Lipschitz and Hölder constants available in closed form.

use serde::{Deserialize, Serialize};

use super::segment::Segment;
use super::SddeError;
use crate::path::GRID_ALIGN_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Constant,
    NoDelay,
    Linear,
    PointwiseDelay,
    DistributedDelay,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Constant => "constant",
            Family::NoDelay => "no_delay",
            Family::Linear => "linear",
            Family::PointwiseDelay => "pointwise_delay",
            Family::DistributedDelay => "distributed_delay",
        }
    }
}

/// A `d x d` gain: either `g * I` or an explicit row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gain {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Gain {
    fn check(&self, dim: usize) -> Result<(), SddeError> {
        match self {
            Gain::Scalar(g) => finite(*g, "gain"),
            Gain::Matrix(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(SddeError::Dimension {
                        what: "gain matrix",
                        expected: dim,
                        got: rows.len(),
                    });
                }
                rows.iter().flatten().try_for_each(|&v| finite(v, "gain"))
            }
        }
    }

    /// `out += scale * G x`.
    #[inline]
    fn apply(&self, scale: f64, x: &[f64], out: &mut [f64]) {
        match self {
            Gain::Scalar(g) => {
                let s = scale * g;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += s * xi;
                }
            }
            Gain::Matrix(rows) => {
                for (o, row) in out.iter_mut().zip(rows) {
                    *o += scale * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }

    /// Frobenius norm, an upper bound for the operator norm.
    pub fn norm(&self, dim: usize) -> f64 {
        match self {
            Gain::Scalar(g) => g.abs() * (dim as f64).sqrt(),
            Gain::Matrix(rows) => rows.iter().flatten().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    fn plus(&self, other: &Gain, dim: usize) -> Gain {
        match (self, other) {
            (Gain::Scalar(a), Gain::Scalar(b)) => Gain::Scalar(a + b),
            _ => {
                let dense = |g: &Gain| -> Vec<Vec<f64>> {
                    match g {
                        Gain::Scalar(s) => (0..dim)
                            .map(|i| (0..dim).map(|j| if i == j { *s } else { 0.0 }).collect())
                            .collect(),
                        Gain::Matrix(m) => m.clone(),
                    }
                };
                let (a, b) = (dense(self), dense(other));
                Gain::Matrix(
                    a.iter()
                        .zip(&b)
                        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
                        .collect(),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayTap {
    pub lag: f64,
    pub gain: Gain,
}

/// Weight `w(u)` on `[-r, 0]`; only bounded-variation weights are offered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelWeight {
    Uniform { height: f64 },
    Exponential { height: f64, rate: f64 },
}

impl KernelWeight {
    #[inline]
    pub fn at(&self, u: f64) -> f64 {
        match *self {
            KernelWeight::Uniform { height } => height,
            KernelWeight::Exponential { height, rate } => height * (rate * u).exp(),
        }
    }

    /// `\int w(u) psi(u) du` over the window of `psi`, with `psi` read as its
    /// piecewise-linear interpolant; each cell is integrated exactly.
    pub fn integrate_linear(&self, psi: &Segment<'_>, acc: &mut [f64]) {
        let n = psi.n_nodes();
        let h = psi.dt();
        let r = psi.delay();
        for i in 0..n.saturating_sub(1) {
            let u0 = -r + i as f64 * h;
            let (w0, w1) = self.cell_moments(u0, h);
            // weight of the left node and of the right node of the cell
            let (left, right) = (w0 - w1 / h, w1 / h);
            for ((a, x0), x1) in acc.iter_mut().zip(psi.node(i)).zip(psi.node(i + 1)) {
                *a += left * x0 + right * x1;
            }
        }
    }

    /// `(\int_{u0}^{u0+h} w, \int_{u0}^{u0+h} w(u) (u - u0) du)`.
    fn cell_moments(&self, u0: f64, h: f64) -> (f64, f64) {
        match *self {
            KernelWeight::Uniform { height } => (height * h, 0.5 * height * h * h),
            KernelWeight::Exponential { height, rate } => {
                if rate == 0.0 {
                    return (height * h, 0.5 * height * h * h);
                }
                let e0 = (rate * u0).exp();
                let e1 = (rate * (u0 + h)).exp();
                let m0 = height * (e1 - e0) / rate;
                let m1 = height * (h * e1 / rate - (e1 - e0) / (rate * rate));
                (m0, m1)
            }
        }
    }

    /// `\int_{-r}^0 |w(u)| du`.
    pub fn total_mass(&self, r: f64) -> f64 {
        match *self {
            KernelWeight::Uniform { height } => height.abs() * r,
            KernelWeight::Exponential { height, rate } => {
                if rate == 0.0 {
                    height.abs() * r
                } else {
                    height.abs() * (1.0 - (-rate * r).exp()) / rate
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayKernel {
    pub weight: KernelWeight,
    pub gain: Gain,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeModulation {
    #[default]
    One,
    /// `sin(frequency * t + phase)`
    Sine { frequency: f64, phase: f64 },
}

impl TimeModulation {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            TimeModulation::One => 1.0,
            TimeModulation::Sine { frequency, phase } => (frequency * t + phase).sin(),
        }
    }

    /// `H` with `|m(t1) - m(t2)| <= H |t1 - t2|^beta`.
    pub fn holder_constant(&self, beta: f64) -> f64 {
        match *self {
            TimeModulation::One => 0.0,
            // min(2, w x) <= 2^{1-beta} (w x)^beta
            TimeModulation::Sine { frequency, .. } => 2f64.powf(1.0 - beta) * frequency.abs().powf(beta),
        }
    }

    fn is_one(&self) -> bool {
        matches!(self, TimeModulation::One)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineMap {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<Gain>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taps: Vec<DelayTap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<DelayKernel>,
    #[serde(default, skip_serializing_if = "TimeModulation::is_one")]
    pub modulation: TimeModulation,
}

impl AffineMap {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: Vec<f64>) -> Self {
        Self {
            offset: Some(value),
            ..Self::default()
        }
    }

    /// `g * psi(0)`.
    pub fn scalar_gain(g: f64) -> Self {
        Self {
            current: Some(Gain::Scalar(g)),
            ..Self::default()
        }
    }

    pub fn with_offset(mut self, offset: Vec<f64>) -> Self {
        self.offset = Some(offset);
        self
    }

    pub fn with_tap(mut self, lag: f64, gain: Gain) -> Self {
        self.taps.push(DelayTap { lag, gain });
        self
    }

    pub fn with_kernel(mut self, weight: KernelWeight, gain: Gain) -> Self {
        self.kernel = Some(DelayKernel { weight, gain });
        self
    }

    pub fn with_modulation(mut self, modulation: TimeModulation) -> Self {
        self.modulation = modulation;
        self
    }

    fn check(&self, dim: usize, delay: f64) -> Result<(), SddeError> {
        if let Some(o) = &self.offset {
            if o.len() != dim {
                return Err(SddeError::Dimension {
                    what: "offset",
                    expected: dim,
                    got: o.len(),
                });
            }
            o.iter().try_for_each(|&v| finite(v, "offset"))?;
        }
        if let Some(g) = &self.current {
            g.check(dim)?;
        }
        for tap in &self.taps {
            tap.gain.check(dim)?;
            if !(tap.lag > 0.0) || tap.lag > delay * (1.0 + GRID_ALIGN_TOL) {
                return Err(SddeError::LagExceedsDelay { lag: tap.lag, delay });
            }
        }
        if let Some(k) = &self.kernel {
            k.gain.check(dim)?;
            let (h, rate) = match k.weight {
                KernelWeight::Uniform { height } => (height, 0.0),
                KernelWeight::Exponential { height, rate } => (height, rate),
            };
            finite(h, "kernel height")?;
            finite(rate, "kernel rate")?;
        }
        if let TimeModulation::Sine { frequency, phase } = self.modulation {
            finite(frequency, "frequency")?;
            finite(phase, "phase")?;
        }
        Ok(())
    }

    fn is_affine_in_current_only(&self) -> bool {
        self.taps.is_empty() && self.kernel.is_none()
    }

    fn ignores_state(&self) -> bool {
        self.current.is_none() && self.is_affine_in_current_only()
    }

    /// `out = map(t, psi)`; lags are snapped to the segment grid.
    #[inline]
    pub fn eval_into(&self, t: f64, psi: &Segment<'_>, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let m = self.modulation.at(t);
        if let Some(o) = &self.offset {
            for (dst, v) in out.iter_mut().zip(o) {
                *dst = m * v;
            }
        }
        if let Some(g) = &self.current {
            g.apply(m, psi.current(), out);
        }
        for tap in &self.taps {
            let k = (tap.lag / psi.dt()).round() as usize;
            tap.gain.apply(m, psi.lagged(k), out);
        }
        if let Some(kernel) = &self.kernel {
            let mut acc = vec![0.0; psi.dim()];
            kernel.weight.integrate_linear(psi, &mut acc);
            kernel.gain.apply(m, &acc, out);
        }
    }

    /// `(|offset|, L)` with `|map(t, psi)| <= |offset| + L ||psi||_C`.
    pub fn growth(&self, dim: usize, delay: f64) -> (f64, f64) {
        let o = self.offset.as_deref().map(crate::path::euclid).unwrap_or(0.0);
        let mut l = self.current.as_ref().map(|g| g.norm(dim)).unwrap_or(0.0);
        l += self.taps.iter().map(|t| t.gain.norm(dim)).sum::<f64>();
        if let Some(k) = &self.kernel {
            l += k.gain.norm(dim) * k.weight.total_mass(delay);
        }
        (o, l)
    }
}

/// Constants asserted for a coefficient set, checked by [`super::check_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimedConstants {
    /// Linear growth, Fréchet bound and time-Hölder constant `K`.
    pub k: f64,
    /// Local Lipschitz constant `K_R` on the ball of radius `radius`.
    pub k_r: f64,
    pub radius: f64,
    /// Time-Hölder exponent of `c`.
    pub beta: f64,
    /// Hölder exponent of the initial condition.
    pub theta: f64,
}

/// Coefficients `(a, b, c)` of a mixed delay equation in `R^d` with `m` Wiener and `l` Hölder drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub family: Family,
    pub dim: usize,
    /// Delay horizon `r`; every tap lag must lie in `(0, r]`.
    pub delay: f64,
    pub drift: AffineMap,
    pub diffusion: Vec<AffineMap>,
    pub fractional: Vec<AffineMap>,
    pub constants: ClaimedConstants,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Drift,
    Diffusion,
    Fractional,
}

/// Closed-form constants implied by the family parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpliedConstants {
    /// Linear growth `K` in `|a| + |b| + |c| <= K (1 + ||psi||)`.
    pub growth: f64,
    /// Global Lipschitz constant of `(a, b)` in `psi`.
    pub lipschitz: f64,
    /// Bound on `||d_psi c||`.
    pub frechet: f64,
    /// `K` in `|c(t1, psi) - c(t2, psi)| <= K |t1 - t2|^beta (1 + ||psi||)`.
    pub time_holder: f64,
}

impl CoefficientSpec {
    /// Scalar `dX = a X dt + b X dW + c X dZ`.
    pub fn geometric(a: f64, b: f64, c: f64) -> Self {
        let mut spec = Self {
            family: Family::Linear,
            dim: 1,
            delay: 0.0,
            drift: AffineMap::scalar_gain(a),
            diffusion: vec![AffineMap::scalar_gain(b)],
            fractional: vec![AffineMap::scalar_gain(c)],
            constants: ClaimedConstants {
                k: 0.0,
                k_r: 0.0,
                radius: 1.0,
                beta: 0.9,
                theta: 0.45,
            },
        };
        spec.constants = spec.tight_constants(0.9, 0.45);
        spec
    }

    /// `(a, b, c)` when the coefficients are the scalar `dX = a X dt + b X dW + c X dZ` (no delay).
    pub fn as_geometric(&self) -> Option<(f64, f64, f64)> {
        if self.dim != 1 || self.n_wiener() != 1 || self.n_fractional() != 1 {
            return None;
        }
        let gain = |m: &AffineMap| -> Option<f64> {
            if m.offset.is_some() || !m.taps.is_empty() || m.kernel.is_some() || !m.modulation.is_one() {
                return None;
            }
            match &m.current {
                None => Some(0.0),
                Some(Gain::Scalar(g)) => Some(*g),
                Some(Gain::Matrix(rows)) => Some(rows[0][0]),
            }
        };
        Some((gain(&self.drift)?, gain(&self.diffusion[0])?, gain(&self.fractional[0])?))
    }

    /// Claimed constants set to the closed-form ones.
    pub fn tight_constants(&self, beta: f64, theta: f64) -> ClaimedConstants {
        let c = self.implied_constants(beta);
        ClaimedConstants {
            k: c.growth.max(c.frechet).max(c.time_holder),
            k_r: c.lipschitz,
            radius: self.constants.radius,
            beta,
            theta,
        }
    }

    pub fn n_wiener(&self) -> usize {
        self.diffusion.len()
    }

    pub fn n_fractional(&self) -> usize {
        self.fractional.len()
    }

    pub fn maps(&self) -> impl Iterator<Item = &AffineMap> {
        std::iter::once(&self.drift).chain(&self.diffusion).chain(&self.fractional)
    }

    pub fn validate(&self) -> Result<(), SddeError> {
        if self.dim == 0 {
            return Err(SddeError::Dimension {
                what: "state",
                expected: 1,
                got: 0,
            });
        }
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(SddeError::Family(format!("delay horizon must be finite and >= 0, got {}", self.delay)));
        }
        for map in self.maps() {
            map.check(self.dim, self.delay)?;
        }
        let family = self.family.name();
        let violation = |what: &str| Err(SddeError::Family(format!("family {family} does not allow {what}")));
        match self.family {
            Family::Constant => {
                if self.maps().any(|m| !m.ignores_state() || !m.modulation.is_one()) {
                    return violation("state dependence or time modulation");
                }
            }
            Family::NoDelay => {
                if self.maps().any(|m| !m.is_affine_in_current_only()) {
                    return violation("delay taps or kernels");
                }
            }
            Family::Linear => {
                if self.maps().any(|m| m.offset.is_some() || m.kernel.is_some()) {
                    return violation("offsets or kernels");
                }
            }
            Family::PointwiseDelay => {
                if self.maps().any(|m| m.kernel.is_some()) {
                    return violation("kernels");
                }
                let lags: Vec<f64> = self.maps().flat_map(|m| m.taps.iter().map(|t| t.lag)).collect();
                if lags.windows(2).any(|w| (w[0] - w[1]).abs() > GRID_ALIGN_TOL * w[0]) {
                    return violation("more than one delay lag");
                }
            }
            Family::DistributedDelay => {}
        }
        let c = self.constants;
        if !(c.k >= 0.0 && c.k_r >= 0.0 && c.radius > 0.0) {
            return Err(SddeError::Family("claimed constants must be non-negative with positive radius".into()));
        }
        Ok(())
    }

    /// The single lag `tau` of a pointwise-delay spec, if any tap is present.
    pub fn tau(&self) -> Option<f64> {
        self.maps().flat_map(|m| m.taps.first()).map(|t| t.lag).next()
    }

    /// Same coefficients with every tap moved to lag `tau` (and `r` raised to `tau` if needed).
    pub fn with_tau(&self, tau: f64) -> Self {
        let mut out = self.clone();
        for map in std::iter::once(&mut out.drift)
            .chain(out.diffusion.iter_mut())
            .chain(out.fractional.iter_mut())
        {
            for tap in &mut map.taps {
                tap.lag = tau;
            }
        }
        out.delay = out.delay.max(tau);
        out
    }

    /// The limit `tau -> 0`: `f(s, x, y)` becomes `f(s, x, x)`, i.e. taps fold into the current gain.
    pub fn collapse_delay(&self) -> Self {
        let mut out = self.clone();
        let dim = self.dim;
        for map in std::iter::once(&mut out.drift)
            .chain(out.diffusion.iter_mut())
            .chain(out.fractional.iter_mut())
        {
            for tap in std::mem::take(&mut map.taps) {
                map.current = Some(match &map.current {
                    None => tap.gain,
                    Some(g) => g.plus(&tap.gain, dim),
                });
            }
        }
        if out.family == Family::PointwiseDelay {
            out.family = Family::NoDelay;
        }
        out.delay = 0.0;
        out
    }

    /// Adds `shift` to every coordinate of the drift offset.
    pub fn shift_drift(&self, shift: f64) -> Self {
        let mut out = self.clone();
        let offset = out.drift.offset.get_or_insert_with(|| vec![0.0; self.dim]);
        offset.iter_mut().for_each(|o| *o += shift);
        if out.family == Family::Linear {
            out.family = Family::NoDelay;
            if self.maps().any(|m| !m.taps.is_empty()) {
                out.family = Family::PointwiseDelay;
            }
        }
        out
    }

    /// Adds `shift * I` to the drift's current gain.
    pub fn shift_drift_gain(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.drift.current = Some(match &out.drift.current {
            None => Gain::Scalar(shift),
            Some(g) => g.plus(&Gain::Scalar(shift), self.dim),
        });
        out
    }

    /// Replaces the Hölder-driver coefficients by zero.
    pub fn without_fractional(&self) -> Self {
        let mut out = self.clone();
        out.fractional.iter_mut().for_each(|m| *m = AffineMap::zero());
        out
    }

    pub fn implied_constants(&self, beta: f64) -> ImpliedConstants {
        let (d, r) = (self.dim, self.delay);
        let mut growth_o = 0.0;
        let mut growth_l = 0.0;
        for map in self.maps() {
            let (o, l) = map.growth(d, r);
            growth_o += o;
            growth_l += l;
        }
        let mut lipschitz = self.drift.growth(d, r).1;
        lipschitz += self.diffusion.iter().map(|m| m.growth(d, r).1).sum::<f64>();
        let mut frechet = 0.0;
        let mut time_holder: f64 = 0.0;
        for map in &self.fractional {
            let (o, l) = map.growth(d, r);
            frechet += l;
            time_holder += map.modulation.holder_constant(beta) * o.max(l);
        }
        ImpliedConstants {
            growth: growth_o.max(growth_l),
            lipschitz,
            frechet,
            time_holder,
        }
    }

    /// `a(t, psi)` into `out` (length `d`).
    #[inline]
    pub fn drift_into(&self, t: f64, psi: &Segment<'_>, out: &mut [f64]) {
        self.drift.eval_into(t, psi, out);
    }

    /// `b(t, psi)` into `out`, column-major `d x m` (column `i` is `b_i`).
    #[inline]
    pub fn diffusion_into(&self, t: f64, psi: &Segment<'_>, out: &mut [f64]) {
        for (map, col) in self.diffusion.iter().zip(out.chunks_exact_mut(self.dim)) {
            map.eval_into(t, psi, col);
        }
    }

    /// `c(t, psi)` into `out`, column-major `d x l`.
    #[inline]
    pub fn fractional_into(&self, t: f64, psi: &Segment<'_>, out: &mut [f64]) {
        for (map, col) in self.fractional.iter().zip(out.chunks_exact_mut(self.dim)) {
            map.eval_into(t, psi, col);
        }
    }

    /// Checks that `psi` matches the dimension and covers every lag of the spec.
    pub fn check_segment(&self, psi: &Segment<'_>) -> Result<(), SddeError> {
        if psi.dim() != self.dim {
            return Err(SddeError::Dimension {
                what: "segment",
                expected: self.dim,
                got: psi.dim(),
            });
        }
        for tap in self.maps().flat_map(|m| &m.taps) {
            psi.lag_steps(tap.lag)?;
        }
        if self.maps().any(|m| m.kernel.is_some()) && (psi.delay() - self.delay).abs() > GRID_ALIGN_TOL * psi.dt() {
            return Err(SddeError::LagExceedsDelay {
                lag: psi.delay(),
                delay: self.delay,
            });
        }
        Ok(())
    }
}

/// Value of `a`, `b` or `c` at `(t, psi)`; matrices are column-major.
pub fn eval_coefficient(spec: &CoefficientSpec, which: Which, t: f64, psi: &Segment<'_>) -> Result<Vec<f64>, SddeError> {
    spec.check_segment(psi)?;
    let d = spec.dim;
    Ok(match which {
        Which::Drift => {
            let mut out = vec![0.0; d];
            spec.drift_into(t, psi, &mut out);
            out
        }
        Which::Diffusion => {
            let mut out = vec![0.0; d * spec.n_wiener()];
            spec.diffusion_into(t, psi, &mut out);
            out
        }
        Which::Fractional => {
            let mut out = vec![0.0; d * spec.n_fractional()];
            spec.fractional_into(t, psi, &mut out);
            out
        }
    })
}

fn finite(v: f64, what: &'static str) -> Result<(), SddeError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SddeError::NonFinite(what))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::GridPath;
    use crate::sdde::segment_at;
    use proptest::prelude::*;

    fn constants() -> ClaimedConstants {
        ClaimedConstants {
            k: 10.0,
            k_r: 10.0,
            radius: 1.0,
            beta: 0.9,
            theta: 0.45,
        }
    }

    #[test]
    fn constant_family_ignores_state() {
        let spec = CoefficientSpec {
            family: Family::Constant,
            dim: 2,
            delay: 0.5,
            drift: AffineMap::constant(vec![1.5, -2.0]),
            diffusion: vec![AffineMap::constant(vec![0.1, 0.2])],
            fractional: vec![],
            constants: constants(),
        };
        spec.validate().unwrap();
        let p = GridPath::new(-0.5, 0.25, 2, vec![3.0, 1.0, -7.0, 2.0, 0.0, 0.0]).unwrap();
        let s = segment_at(&p, 0.0, 0.5).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(eval_coefficient(&spec, Which::Drift, t, &s).unwrap(), vec![1.5, -2.0]);
            assert_eq!(eval_coefficient(&spec, Which::Diffusion, t, &s).unwrap(), vec![0.1, 0.2]);
        }
    }

    #[test]
    fn linear_identity() {
        let spec = CoefficientSpec {
            family: Family::Linear,
            dim: 2,
            delay: 0.5,
            drift: AffineMap::scalar_gain(1.0).with_tap(0.5, Gain::Scalar(0.0)),
            diffusion: vec![],
            fractional: vec![],
            constants: constants(),
        };
        spec.validate().unwrap();
        let p = GridPath::new(-0.5, 0.5, 2, vec![9.0, 9.0, 1.0, 2.0]).unwrap();
        let s = segment_at(&p, 0.0, 0.5).unwrap();
        assert_eq!(eval_coefficient(&spec, Which::Drift, 0.0, &s).unwrap(), vec![1.0, 2.0]);
        let wrong = GridPath::constant(-0.5, 0.5, 2, &[1.0]).unwrap();
        let s1 = segment_at(&wrong, 0.0, 0.5).unwrap();
        assert!(matches!(eval_coefficient(&spec, Which::Drift, 0.0, &s1), Err(SddeError::Dimension { .. })));
    }

    #[test]
    fn uniform_kernel_integrates_linear_segment() {
        let spec = CoefficientSpec {
            family: Family::DistributedDelay,
            dim: 1,
            delay: 1.0,
            drift: AffineMap::zero().with_kernel(KernelWeight::Uniform { height: 1.0 }, Gain::Scalar(1.0)),
            diffusion: vec![],
            fractional: vec![],
            constants: constants(),
        };
        spec.validate().unwrap();
        let p = GridPath::on_interval(-1.0, 0.0, 1 << 10, |u| 1.0 + u).unwrap();
        let s = segment_at(&p, 0.0, 1.0).unwrap();
        let v = eval_coefficient(&spec, Which::Drift, 0.0, &s).unwrap()[0];
        assert!((v - 0.5).abs() < 1e-4);
    }

    #[test]
    fn exponential_kernel_against_closed_form() {
        // \int_{-1}^0 e^{2u} du = (1 - e^{-2}) / 2
        let w = KernelWeight::Exponential { height: 1.0, rate: 2.0 };
        let map = AffineMap::zero().with_kernel(w, Gain::Scalar(1.0));
        let p = GridPath::on_interval(-1.0, 0.0, 1 << 10, |_| 1.0).unwrap();
        let s = segment_at(&p, 0.0, 1.0).unwrap();
        let mut out = [0.0];
        map.eval_into(0.0, &s, &mut out);
        let expect = (1.0 - (-2f64).exp()) / 2.0;
        assert!((out[0] - expect).abs() < 1e-14);
        assert!((w.total_mass(1.0) - expect).abs() < 1e-15);
    }

    #[test]
    fn geometric_recognition() {
        assert_eq!(CoefficientSpec::geometric(0.5, 0.4, 0.3).as_geometric(), Some((0.5, 0.4, 0.3)));
        assert_eq!(CoefficientSpec::geometric(0.5, 0.4, 0.3).shift_drift(0.1).as_geometric(), None);
        let mut delayed = CoefficientSpec::geometric(0.5, 0.4, 0.3);
        delayed.delay = 0.5;
        delayed.drift = delayed.drift.with_tap(0.5, Gain::Scalar(1.0));
        assert_eq!(delayed.as_geometric(), None);
    }

    #[test]
    fn family_rules() {
        let mut spec = CoefficientSpec::geometric(0.5, 0.4, 0.3);
        spec.validate().unwrap();
        spec.drift.offset = Some(vec![1.0]);
        assert!(matches!(spec.validate(), Err(SddeError::Family(_))));
        let mut pd = CoefficientSpec::geometric(0.3, 0.0, 0.2);
        pd.family = Family::PointwiseDelay;
        pd.delay = 0.5;
        pd.drift = pd.drift.with_tap(0.5, Gain::Scalar(0.3));
        pd.diffusion[0] = AffineMap::zero().with_tap(0.25, Gain::Scalar(0.2));
        assert!(matches!(pd.validate(), Err(SddeError::Family(_))));
        let pd = pd.with_tau(0.25);
        pd.validate().unwrap();
        assert_eq!(pd.tau(), Some(0.25));
        let mut too_long = pd.clone();
        too_long.delay = 0.1;
        assert!(matches!(too_long.validate(), Err(SddeError::LagExceedsDelay { .. })));
    }

    #[test]
    fn collapse_folds_taps_into_current() {
        let mut pd = CoefficientSpec::geometric(0.3, 0.0, 0.2);
        pd.family = Family::PointwiseDelay;
        pd.delay = 0.5;
        pd.drift = pd.drift.with_tap(0.5, Gain::Scalar(0.3));
        pd.diffusion[0] = AffineMap::zero().with_tap(0.5, Gain::Scalar(0.2));
        let flat = pd.collapse_delay();
        flat.validate().unwrap();
        assert_eq!(flat.family, Family::NoDelay);
        assert_eq!(flat.drift.current, Some(Gain::Scalar(0.6)));
        assert_eq!(flat.diffusion[0].current, Some(Gain::Scalar(0.2)));
        assert_eq!(flat.delay, 0.0);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let mut spec = CoefficientSpec::geometric(0.5, 0.4, 0.3);
        spec.fractional[0] = spec.fractional[0].clone().with_modulation(TimeModulation::Sine { frequency: 1.0, phase: 0.0 });
        let text = serde_json::to_string(&spec).unwrap();
        let back: CoefficientSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let bad = text.replace("\"current\"", "\"curent\"");
        assert!(serde_json::from_str::<CoefficientSpec>(&bad).is_err());
    }

    fn random_spec_strategy() -> impl Strategy<Value = (CoefficientSpec, Vec<f64>)> {
        (
            proptest::collection::vec(-2.0f64..2.0, 9),
            prop_oneof![Just(Family::Linear), Just(Family::PointwiseDelay), Just(Family::DistributedDelay), Just(Family::NoDelay), Just(Family::Constant)],
            proptest::collection::vec(-50.0f64..50.0, 2 * 9),
        )
            .prop_map(|(p, family, psi)| {
                let d = 2;
                let mat = |a: f64, b: f64| Gain::Matrix(vec![vec![a, b], vec![-b, a]]);
                let (drift, diff, frac) = match family {
                    Family::Constant => (
                        AffineMap::constant(vec![p[0], p[1]]),
                        AffineMap::constant(vec![p[2], p[3]]),
                        AffineMap::constant(vec![p[4], p[5]]),
                    ),
                    Family::NoDelay => (
                        AffineMap {
                            offset: Some(vec![p[0], p[1]]),
                            current: Some(mat(p[2], p[3])),
                            ..AffineMap::default()
                        },
                        AffineMap::scalar_gain(p[4]),
                        AffineMap::scalar_gain(p[5]).with_modulation(TimeModulation::Sine { frequency: p[6], phase: p[7] }),
                    ),
                    Family::Linear | Family::PointwiseDelay => (
                        AffineMap::scalar_gain(p[0]).with_tap(0.5, mat(p[1], p[2])),
                        AffineMap::zero().with_tap(0.5, Gain::Scalar(p[3])),
                        AffineMap::scalar_gain(p[4]),
                    ),
                    Family::DistributedDelay => (
                        AffineMap::scalar_gain(p[0]).with_kernel(KernelWeight::Exponential { height: p[1], rate: p[2] }, mat(p[3], p[4])),
                        AffineMap::scalar_gain(p[5]),
                        AffineMap::zero().with_offset(vec![p[6], p[7]]).with_kernel(KernelWeight::Uniform { height: p[8] }, Gain::Scalar(1.0)),
                    ),
                };
                let mut spec = CoefficientSpec {
                    family,
                    dim: d,
                    delay: 1.0,
                    drift,
                    diffusion: vec![diff],
                    fractional: vec![frac],
                    constants: constants(),
                };
                spec.constants = spec.tight_constants(0.9, 0.45);
                (spec, psi)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn implied_growth_constant_holds((spec, psi) in random_spec_strategy(), t in 0.0f64..1.0) {
            spec.validate().unwrap();
            let p = GridPath::new(-1.0, 0.125, 2, psi).unwrap();
            let s = segment_at(&p, 0.0, 1.0).unwrap();
            let k = spec.implied_constants(0.9).growth;
            let a = eval_coefficient(&spec, Which::Drift, t, &s).unwrap();
            let b = eval_coefficient(&spec, Which::Diffusion, t, &s).unwrap();
            let c = eval_coefficient(&spec, Which::Fractional, t, &s).unwrap();
            let lhs = crate::path::euclid(&a) + crate::path::euclid(&b) + crate::path::euclid(&c);
            prop_assert!(lhs <= k * (1.0 + s.sup_norm()) * (1.0 + 1e-12));
        }

        #[test]
        fn no_delay_reads_only_current(
            psi in proptest::collection::vec(-5.0f64..5.0, 9),
            shuffle in proptest::collection::vec(0usize..8, 8),
            g in -2.0f64..2.0,
        ) {
            let spec = CoefficientSpec {
                family: Family::NoDelay,
                dim: 1,
                delay: 1.0,
                drift: AffineMap::scalar_gain(g).with_offset(vec![0.3]),
                diffusion: vec![AffineMap::scalar_gain(-g)],
                fractional: vec![AffineMap::scalar_gain(0.5 * g)],
                constants: constants(),
            };
            let mut perm = psi.clone();
            for (i, &j) in shuffle.iter().enumerate() {
                perm.swap(i, j);
            }
            let p1 = GridPath::scalar(-1.0, 0.125, psi).unwrap();
            let p2 = GridPath::scalar(-1.0, 0.125, perm).unwrap();
            let (s1, s2) = (segment_at(&p1, 0.0, 1.0).unwrap(), segment_at(&p2, 0.0, 1.0).unwrap());
            for which in [Which::Drift, Which::Diffusion, Which::Fractional] {
                prop_assert_eq!(eval_coefficient(&spec, which, 0.2, &s1).unwrap(), eval_coefficient(&spec, which, 0.2, &s2).unwrap());
            }
        }
    }
}
