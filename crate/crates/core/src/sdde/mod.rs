//! Domain model of the delay equation
//!
//! ```text
//! X(t) = eta(0) + \int_0^t a(s, X_s) ds + sum_i \int_0^t b_i(s, X_s) dW_i + sum_j \int_0^t c_j(s, X_s) dZ_j,
//! X(t) = eta(t) on [-r, 0],
//! ```
//!
//! where `X_s(u) = X(s + u)`, `u in [-r, 0]` is the segment at `s`.

mod check;
mod coeff;
mod segment;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::holder_seminorm;
use crate::path::{GridPath, PathError};

pub use check::{check_assumptions, AssumptionReport, CheckOutcome, SampleBudget, Witness};
pub use coeff::{
    eval_coefficient, AffineMap, ClaimedConstants, CoefficientSpec, DelayKernel, DelayTap, Family, Gain, ImpliedConstants,
    KernelWeight, TimeModulation, Which,
};
pub use segment::{segment_at, Segment};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SddeError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("lag {lag} is not a multiple of the grid step {dt}")]
    NotAligned { lag: f64, dt: f64 },
    #[error("lag {lag} exceeds the delay horizon {delay}")]
    LagExceedsDelay { lag: f64, delay: f64 },
    #[error("{0}")]
    Family(String),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    /// An admissibility constraint on the exponents, named in the message.
    #[error("{0}")]
    Constraint(String),
    #[error("initial condition: {0}")]
    Initial(String),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Exponents `(H, gamma, alpha, beta, theta)` of the driver, the fractional
/// calculus and the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderParams {
    pub hurst: f64,
    /// Hölder order of the paths of `Z`.
    pub gamma: f64,
    pub alpha: f64,
    /// Time-Hölder order of `c`.
    pub beta: f64,
    /// Hölder order of `eta`.
    pub theta: f64,
}

/// Rounds away binary noise such as `1 - 0.7 = 0.30000000000000004` for messages.
pub(crate) fn show(x: f64) -> String {
    let r = (x * 1e12).round() / 1e12;
    format!("{r}")
}

impl HolderParams {
    pub fn new(hurst: f64, gamma: f64, alpha: f64, beta: f64, theta: f64) -> Result<Self, SddeError> {
        let p = Self {
            hurst,
            gamma,
            alpha,
            beta,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Enforces `1/2 < gamma < H < 1`, `alpha in (1-gamma, 1/2)`,
    /// `beta in (1-gamma, 1)` and `theta in (1-gamma, 1/2)`.
    pub fn validate(&self) -> Result<(), SddeError> {
        let fail = |msg: String| Err(SddeError::Constraint(msg));
        if !(self.hurst > 0.5) {
            return fail("hurst must exceed 1/2".into());
        }
        if !(self.hurst < 1.0) {
            return fail("hurst must be below 1".into());
        }
        if !(self.gamma > 0.5) {
            return fail("gamma must exceed 1/2".into());
        }
        if !(self.gamma < self.hurst) {
            return fail(format!("gamma must be below hurst = {}", show(self.hurst)));
        }
        let lo = show(1.0 - self.gamma);
        if !(self.alpha > 1.0 - self.gamma && self.alpha < 0.5) {
            return fail(format!("alpha must lie in ({lo}, 0.5)"));
        }
        if !(self.beta > 1.0 - self.gamma && self.beta < 1.0) {
            return fail(format!("beta must lie in ({lo}, 1)"));
        }
        if !(self.theta > 1.0 - self.gamma && self.theta < 0.5) {
            return fail(format!("theta must lie in ({lo}, 0.5)"));
        }
        Ok(())
    }
}

/// The initial segment `eta` on `[-r, 0]` with its Hölder exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    eta: GridPath,
    theta: f64,
}

impl InitialCondition {
    pub fn new(eta: GridPath, theta: f64) -> Result<Self, SddeError> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(SddeError::Initial(format!("theta must lie in (0, 1], got {theta}")));
        }
        if !eta.all_finite() {
            return Err(SddeError::Initial("values must be finite".into()));
        }
        let end = eta.t_end();
        if end.abs() > crate::path::GRID_ALIGN_TOL * eta.dt() {
            return Err(SddeError::Initial(format!("path must end at time 0, ends at {end}")));
        }
        Ok(Self { eta, theta })
    }

    /// `eta = x0` on `[-r, 0]` with step `dt`.
    pub fn constant(x0: &[f64], r: f64, dt: f64) -> Result<Self, SddeError> {
        let steps = segment::lag_steps(r, dt, usize::MAX)?;
        let eta = GridPath::constant(-(steps as f64) * dt, dt, steps + 1, x0)?;
        Self::new(eta, 1.0)
    }

    pub fn path(&self) -> &GridPath {
        &self.eta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.eta.dim()
    }

    pub fn delay(&self) -> f64 {
        -self.eta.t0()
    }

    pub fn at_zero(&self) -> &[f64] {
        self.eta.node(self.eta.len() - 1)
    }

    /// Grid Hölder constant of `eta` at exponent `theta` (sum over coordinates).
    pub fn holder_constant(&self) -> f64 {
        if self.eta.len() < 2 {
            return 0.0;
        }
        (0..self.dim())
            .map(|j| holder_seminorm(&self.eta.coordinate_path(j), self.theta, None).unwrap_or(f64::INFINITY))
            .sum()
    }

    /// `eta + shift` in every coordinate.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            eta: self.eta.map(|v| v + shift),
            theta: self.theta,
        }
    }

    /// The same initial condition on a grid with step `dt`, read by linear interpolation.
    pub fn resampled(&self, dt: f64) -> Result<Self, SddeError> {
        let r = self.delay();
        let steps = segment::lag_steps(r, dt, usize::MAX)?;
        let d = self.dim();
        let mut values = vec![0.0; (steps + 1) * d];
        for k in 0..=steps {
            let t = -r + k as f64 * dt;
            self.eta.interpolate(t.min(0.0), &mut values[k * d..(k + 1) * d])?;
        }
        Self::new(GridPath::new(-(steps as f64) * dt, dt, d, values)?, self.theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holder_params_messages() {
        let ok = HolderParams::new(0.75, 0.7, 0.35, 0.9, 0.45).unwrap();
        assert_eq!(ok.alpha, 0.35);
        let err = |p: HolderParams| p.validate().unwrap_err().to_string();
        assert_eq!(err(HolderParams { hurst: 0.4, ..ok }), "hurst must exceed 1/2");
        assert_eq!(err(HolderParams { alpha: 0.6, ..ok }), "alpha must lie in (0.3, 0.5)");
        assert_eq!(err(HolderParams { alpha: 0.3, ..ok }), "alpha must lie in (0.3, 0.5)");
        assert_eq!(err(HolderParams { gamma: 0.5, ..ok }), "gamma must exceed 1/2");
        assert_eq!(err(HolderParams { gamma: 0.8, ..ok }), "gamma must be below hurst = 0.75");
        assert_eq!(err(HolderParams { beta: 1.0, ..ok }), "beta must lie in (0.3, 1)");
        assert_eq!(err(HolderParams { theta: 0.25, ..ok }), "theta must lie in (0.3, 0.5)");
    }

    #[test]
    fn initial_condition_basics() {
        let ic = InitialCondition::constant(&[1.0, -2.0], 0.5, 0.125).unwrap();
        assert_eq!(ic.delay(), 0.5);
        assert_eq!(ic.at_zero(), &[1.0, -2.0]);
        assert_eq!(ic.holder_constant(), 0.0);
        let no_delay = InitialCondition::constant(&[3.0], 0.0, 0.1).unwrap();
        assert_eq!(no_delay.path().len(), 1);
        let bad = GridPath::on_interval(-1.0, 0.5, 3, |t| t).unwrap();
        assert!(matches!(InitialCondition::new(bad, 0.4), Err(SddeError::Initial(_))));

        let eta = GridPath::on_interval(-1.0, 0.0, 4, |t| t.abs().sqrt()).unwrap();
        let ic = InitialCondition::new(eta, 0.45).unwrap();
        assert!(ic.holder_constant().is_finite());
        let fine = ic.resampled(0.125).unwrap();
        assert_eq!(fine.path().len(), 9);
        assert_eq!(fine.path().value(0), 1.0);
        assert_eq!(fine.path().value(8), 0.0);
    }
}
