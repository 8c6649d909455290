//! Numerical fractional calculus on grid functions.
//!
//! Grid functions are interpreted as their piecewise-linear interpolants and
//! every singular kernel is integrated exactly against that interpolant. This
//! covers the Riemann–Liouville derivatives, the generalized Lebesgue–Stieltjes
//! integral built from them, and the norms used to control pathwise integrals.

mod derivative;
mod integral;
pub mod kernel;
mod norms;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path::{GridPath, PathError};

pub use derivative::{backward_rl_derivative, backward_rl_derivative_at, forward_rl_derivative, forward_rl_derivative_at};
pub use integral::{
    gls_integral, gls_integral_checked, gls_norm_growth, riemann_stieltjes_integral, young_love_bound,
    young_love_constant, NormGrowth, RiemannRule,
};
pub use norms::{delay_norms, fractional_norms, norm_1_alpha, seminorm_0_alpha, vector_seminorm_0_alpha};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FracError {
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("exponent {name} = {value} outside (0, 1]")]
    InvalidExponent { name: &'static str, value: f64 },
    #[error("Young–Love bound needs lambda + mu > 1, got {0}")]
    ExponentSum(f64),
    #[error("expected a scalar path, got dimension {0}")]
    NotScalar(usize),
    #[error("path needs at least {0} nodes on the interval")]
    TooShort(usize),
    #[error("path contains non-finite values")]
    NonFinite,
    #[error("kernel is singular at x = {0}")]
    SingularPoint(f64),
    #[error("paths live on different grids")]
    GridMismatch,
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("grid norm grows by factor {ratio:.3} under refinement (limit {limit})")]
    UnboundedNorm { ratio: f64, limit: f64 },
    #[error("alpha = {alpha} must lie in ({lo}, 1/2)")]
    AlphaOutsideSddeRange { alpha: f64, lo: f64 },
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Fractional order together with the interval it acts on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
}

impl FracParams {
    pub fn new(alpha: f64, a: f64, b: f64) -> Result<Self, FracError> {
        check_alpha(alpha)?;
        if !(a < b) {
            return Err(FracError::Path(PathError::Incompatible(format!("empty interval [{a}, {b}]"))));
        }
        Ok(Self { alpha, a, b })
    }

    /// The tighter range `alpha in (1 - gamma, 1/2)` needed by the delay norms.
    pub fn check_sdde_range(&self, gamma: f64) -> Result<(), FracError> {
        let lo = 1.0 - gamma;
        if !(self.alpha > lo && self.alpha < 0.5) {
            return Err(FracError::AlphaOutsideSddeRange { alpha: self.alpha, lo });
        }
        Ok(())
    }
}

/// Grid proxies of the norms controlling a generalized Lebesgue–Stieltjes integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    /// `||f||_{1,alpha;[a,b]}`
    pub norm_1_alpha: f64,
    /// `||f||_{0,alpha;[a,b]}` (a seminorm)
    pub seminorm_0_alpha: f64,
    pub sup_norm: f64,
    /// Hölder seminorm of order `lambda`
    pub holder: f64,
}

/// The delay norms `||f||_{inf,t}`, `||f||_{1,t}` and their sum `||f||_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayNormBundle {
    pub norm_inf_t: f64,
    pub norm_1_t: f64,
    pub norm_t: f64,
}

impl DelayNormBundle {
    pub fn new(norm_inf_t: f64, norm_1_t: f64) -> Self {
        Self {
            norm_inf_t,
            norm_1_t,
            norm_t: norm_inf_t + norm_1_t,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), FracError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(FracError::InvalidAlpha(alpha))
    }
}

/// Scalar values of `path` restricted to `interval`, validated for use in the kernels.
pub(crate) fn scalar_window(path: &GridPath, interval: Option<(f64, f64)>, min_nodes: usize) -> Result<GridPath, FracError> {
    if path.dim() != 1 {
        return Err(FracError::NotScalar(path.dim()));
    }
    let w = match interval {
        None => path.clone(),
        Some((a, b)) => path.window(a, b)?,
    };
    if w.len() < min_nodes {
        return Err(FracError::TooShort(min_nodes));
    }
    if !w.all_finite() {
        return Err(FracError::NonFinite);
    }
    Ok(w)
}

pub(crate) fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}
