//! Strict experiment configuration: every physics-relevant parameter is required
//! and unknown keys are rejected.

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::driver::FbmMethod;
use crate::sdde::{CoefficientSpec, Family, HolderParams};
use crate::solver::DEFAULT_EXPLOSION_THRESHOLD;

use super::stats::MIN_SAMPLES;

/// Refinement of the finest tested mesh used as reference when no closed form exists.
pub const REFERENCE_REFINEMENT: usize = 4;

fn default_threshold() -> f64 {
    DEFAULT_EXPLOSION_THRESHOLD
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    /// Monte Carlo size `M`; replica `i` uses random stream `i`.
    pub replicas: usize,
    pub horizon: f64,
    pub holder: HolderParams,
    pub spec: CoefficientSpec,
    /// Constant initial value `eta = x0` on `[-r, 0]`.
    pub x0: Vec<f64>,
    /// Driver sampler; resolved from the finest grid size when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fbm_method: Option<FbmMethod>,
    #[serde(default = "default_threshold")]
    pub explosion_threshold: f64,
    pub experiment: ExperimentKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CoeffConvergence(CoeffConvergence),
    VanishingDelay(VanishingDelay),
    EulerRefinement(EulerRefinement),
    ItoLimit(ItoLimit),
    Moments(Moments),
    QuasiContract(QuasiContract),
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::CoeffConvergence(_) => "coeff_convergence",
            ExperimentKind::VanishingDelay(_) => "vanishing_delay",
            ExperimentKind::EulerRefinement(_) => "euler_refinement",
            ExperimentKind::ItoLimit(_) => "ito_limit",
            ExperimentKind::Moments(_) => "moments",
            ExperimentKind::QuasiContract(_) => "quasi_contract",
        }
    }
}

/// Perturbation of size `scale / n` applied at level `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    None,
    /// `a^n = a + (scale / n) 1`
    DriftShift { scale: f64 },
    /// `a^n = a + (scale / n) I psi(0)`
    GainShift { scale: f64 },
    /// `eta^n = eta + (scale / n) 1`
    InitialShift { scale: f64 },
}

/// Pass criteria registered before a convergence run; absent entries are not checked.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceCriteria {
    /// Exceedance estimate at the last level must be below this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_final_exceedance: Option<f64>,
    /// No rise of the exceedance estimate with disjoint Wilson intervals.
    #[serde(default, skip_serializing_if = "is_false")]
    pub exceedance_monotone: bool,
    /// At least this many consecutive levels with non-increasing mean distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_mean_non_increasing: Option<usize>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub mean_strictly_decreasing: bool,
    /// Every per-path distance is exactly zero.
    #[serde(default, skip_serializing_if = "is_false")]
    pub zero_distance: bool,
    /// Slope of log mean distance against log level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<SlopeCriterion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeCriterion {
    pub expected: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffConvergence {
    /// Levels `n`, strictly increasing.
    pub levels: Vec<usize>,
    pub perturbation: Perturbation,
    pub n_steps: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub criteria: ConvergenceCriteria,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VanishingDelay {
    /// Delays `tau_n`, strictly decreasing, each a multiple of the step.
    pub taus: Vec<f64>,
    pub n_steps: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub criteria: ConvergenceCriteria,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerRefinement {
    /// Mesh sizes `n`, strictly increasing, each dividing the finest one.
    pub levels: Vec<usize>,
    pub epsilon: f64,
    #[serde(default)]
    pub criteria: ConvergenceCriteria,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItoLimit {
    /// Mollifier levels `N`, strictly increasing.
    pub levels: Vec<usize>,
    pub n_steps: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub criteria: ConvergenceCriteria,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Moments {
    /// Moment orders, strictly increasing.
    pub p: Vec<f64>,
    pub n_steps: usize,
    /// Truncation level `M` of the event `{||Z||_{0;T} <= M}`.
    pub m_trunc: f64,
    #[serde(default)]
    pub criteria: MomentCriteria,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentCriteria {
    /// Lognormal oracle check for the scalar linear equation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCriterion>,
    /// Relative change of the sup-moment between the first half of the sample and all of it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityCriterion>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub fail_on_heavy_tail: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCriterion {
    pub p: f64,
    pub standard_errors: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityCriterion {
    pub p: f64,
    pub max_relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiContract {
    /// Sizes `eps` of the driver shift `Z2 = Z1 + eps t`, strictly decreasing.
    pub perturbations: Vec<f64>,
    /// Moment order; resolved to the smallest even integer `>= 4 / (1 - 2 alpha)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub n_steps: usize,
    pub m_trunc: f64,
    pub r_trunc: f64,
    #[serde(default)]
    pub criteria: QuasiCriteria,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiCriteria {
    /// Upper bound on `max ratio / min ratio` across perturbation sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ratio_spread: Option<f64>,
}

/// Smallest even integer `>= 4 / (1 - 2 alpha)`.
pub fn default_quasi_p(alpha: f64) -> f64 {
    let bound = 4.0 / (1.0 - 2.0 * alpha);
    let p = (bound / 2.0 - 1e-9).ceil() * 2.0;
    p.max(2.0)
}

fn strictly_increasing<T: PartialOrd>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

fn strictly_decreasing<T: PartialOrd>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[0] > w[1])
}

fn positive(name: &str, v: f64) -> Result<(), ExperimentError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ExperimentError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The config with every optional choice made explicit; validated.
    pub fn resolved(&self) -> Result<Self, ExperimentError> {
        self.validate()?;
        let mut out = self.clone();
        out.fbm_method = Some(self.fbm_method.unwrap_or_else(|| FbmMethod::auto(self.finest_steps())));
        if let ExperimentKind::QuasiContract(q) = &mut out.experiment {
            q.p.get_or_insert(default_quasi_p(self.holder.alpha));
        }
        Ok(out)
    }

    /// `(a, b, c)` when the solution has the closed form `x0 exp((a - b^2/2) t + b W + c Z)`.
    pub fn closed_form(&self) -> Option<(f64, f64, f64)> {
        if self.x0.len() == 1 {
            self.spec.as_geometric()
        } else {
            None
        }
    }

    /// Number of steps of the grid on which the drivers are sampled.
    pub fn finest_steps(&self) -> usize {
        match &self.experiment {
            ExperimentKind::CoeffConvergence(c) => c.n_steps,
            ExperimentKind::VanishingDelay(c) => c.n_steps,
            ExperimentKind::EulerRefinement(c) => {
                let finest = c.levels.iter().copied().max().unwrap_or(0);
                if self.closed_form().is_some() {
                    finest
                } else {
                    REFERENCE_REFINEMENT * finest
                }
            }
            ExperimentKind::ItoLimit(c) => c.n_steps,
            ExperimentKind::Moments(c) => c.n_steps,
            ExperimentKind::QuasiContract(c) => c.n_steps,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |msg: String| Err(ExperimentError::Config(msg));
        self.holder.validate()?;
        self.spec.validate()?;
        if self.replicas < MIN_SAMPLES {
            return fail(format!("replicas must be at least {MIN_SAMPLES}, got {}", self.replicas));
        }
        positive("horizon", self.horizon)?;
        positive("explosion_threshold", self.explosion_threshold)?;
        if self.x0.len() != self.spec.dim {
            return fail(format!("x0 has {} entries but the state dimension is {}", self.x0.len(), self.spec.dim));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return fail("x0 must be finite".into());
        }
        let steps = self.finest_steps();
        if steps < 2 {
            return fail(format!("the finest grid needs at least 2 steps, got {steps}"));
        }
        self.check_aligned("delay horizon", self.spec.delay, steps)?;
        match &self.experiment {
            ExperimentKind::CoeffConvergence(c) => {
                if c.levels.is_empty() || c.levels[0] == 0 || !strictly_increasing(&c.levels) {
                    return fail("levels must be positive and strictly increasing".into());
                }
                positive("epsilon", c.epsilon)?;
                match c.perturbation {
                    Perturbation::None => {}
                    Perturbation::DriftShift { scale } | Perturbation::GainShift { scale } | Perturbation::InitialShift { scale } => {
                        if !scale.is_finite() {
                            return fail("perturbation scale must be finite".into());
                        }
                    }
                }
            }
            ExperimentKind::VanishingDelay(c) => {
                if c.taus.is_empty() || !strictly_decreasing(&c.taus) || !(c.taus[c.taus.len() - 1] > 0.0) {
                    return fail("taus must be positive and strictly decreasing".into());
                }
                positive("epsilon", c.epsilon)?;
                if self.spec.family != Family::PointwiseDelay {
                    return fail(format!("vanishing_delay needs a pointwise_delay spec, got {}", self.spec.family.name()));
                }
                if c.taus[0] > self.spec.delay * (1.0 + crate::path::GRID_ALIGN_TOL) {
                    return fail(format!("tau {} exceeds the delay horizon {}", c.taus[0], self.spec.delay));
                }
                for &tau in &c.taus {
                    self.check_aligned("tau", tau, steps)?;
                }
            }
            ExperimentKind::EulerRefinement(c) => {
                if c.levels.is_empty() || c.levels[0] == 0 || !strictly_increasing(&c.levels) {
                    return fail("levels must be positive and strictly increasing".into());
                }
                positive("epsilon", c.epsilon)?;
                let finest = c.levels[c.levels.len() - 1];
                if let Some(n) = c.levels.iter().find(|&&n| finest % n != 0) {
                    return fail(format!("level {n} does not divide the finest level {finest}"));
                }
                for &n in &c.levels {
                    self.check_aligned("delay horizon", self.spec.delay, n)?;
                }
            }
            ExperimentKind::ItoLimit(c) => {
                if c.levels.is_empty() || c.levels[0] == 0 || !strictly_increasing(&c.levels) {
                    return fail("levels must be positive and strictly increasing".into());
                }
                positive("epsilon", c.epsilon)?;
                let dt = self.horizon / c.n_steps as f64;
                let finest = c.levels[c.levels.len() - 1];
                if dt > 0.25 / finest as f64 * (1.0 + 1e-12) {
                    return fail(format!("step {dt} is too coarse for mollifier level {finest}; need dt <= 1/(4N)"));
                }
            }
            ExperimentKind::Moments(c) => {
                if c.p.is_empty() || !(c.p[0] > 0.0) || !strictly_increasing(&c.p) {
                    return fail("p must be positive and strictly increasing".into());
                }
                positive("m_trunc", c.m_trunc)?;
                let listed = |p: f64| c.p.contains(&p);
                if let Some(o) = c.criteria.oracle {
                    positive("oracle standard_errors", o.standard_errors)?;
                    if !listed(o.p) {
                        return fail(format!("oracle p = {} is not among the moment orders", o.p));
                    }
                    if self.spec.as_geometric().is_none() {
                        return fail("the lognormal oracle needs the scalar linear equation without delay".into());
                    }
                }
                if let Some(s) = c.criteria.stability {
                    if !listed(s.p) {
                        return fail(format!("stability p = {} is not among the moment orders", s.p));
                    }
                    positive("max_relative_change", s.max_relative_change)?;
                    if self.replicas < 2 * MIN_SAMPLES {
                        return fail(format!("the stability check needs at least {} replicas", 2 * MIN_SAMPLES));
                    }
                }
            }
            ExperimentKind::QuasiContract(c) => {
                if c.perturbations.is_empty() || !strictly_decreasing(&c.perturbations) || !(c.perturbations[c.perturbations.len() - 1] >= 0.0) {
                    return fail("perturbations must be non-negative and strictly decreasing".into());
                }
                positive("m_trunc", c.m_trunc)?;
                positive("r_trunc", c.r_trunc)?;
                if let Some(p) = c.p {
                    let min = 4.0 / (1.0 - 2.0 * self.holder.alpha);
                    if !(p >= min) {
                        return fail(format!("p must be at least 4/(1-2 alpha) = {}", crate::sdde::show(min)));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_aligned(&self, what: &str, value: f64, steps: usize) -> Result<(), ExperimentError> {
        let dt = self.horizon / steps as f64;
        let pos = value / dt;
        if (pos - pos.round()).abs() > crate::path::GRID_ALIGN_TOL {
            return Err(ExperimentError::Config(format!("{what} {value} is not a multiple of the step {dt}")));
        }
        Ok(())
    }
}
