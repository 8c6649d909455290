//! Reports written by the experiments. They hold no timing data so that equal
//! configurations give byte-identical files.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::stats::Exceedance;

/// Version string embedded in every report.
pub fn version_string() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Replica `i` draws its drivers from stream `(master_seed, i)` on a grid of `finest_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master_seed: u64,
    pub replicas: usize,
    pub finest_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    /// `n`, `tau_n` or `N`, depending on the experiment.
    pub level: f64,
    pub exceedance: Exceedance,
    pub mean_distance: f64,
    pub median_distance: f64,
    /// Per-replica sup distances in replica order.
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub version: String,
    pub kind: String,
    pub config: ExperimentConfig,
    /// What every level is compared against.
    pub reference: String,
    pub seeds: SeedRecord,
    pub levels: Vec<LevelSummary>,
    /// Descriptive slope of log mean distance against log level.
    pub slope: Option<f64>,
    pub criteria: Vec<CriterionOutcome>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: f64,
    /// `E ||X||_{0,T,inf}^p`
    pub sup_moment: f64,
    pub sup_standard_error: f64,
    /// Same estimate on the first half of the replicas.
    pub half_sample_sup_moment: f64,
    /// `E ||X||_T^p 1{||Z||_{0;T} <= M}`
    pub truncated_moment: f64,
    pub truncated_standard_error: f64,
    /// `E |X(T)|^p`
    pub terminal_moment: f64,
    pub terminal_standard_error: f64,
    /// Exact `E X(T)^p` when the equation is scalar linear without delay.
    pub oracle: Option<f64>,
    /// Share of the sup-moment carried by the top 1% of replicas.
    pub top_percent_share: f64,
    pub heavy_tail: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub version: String,
    pub kind: String,
    pub config: ExperimentConfig,
    pub seeds: SeedRecord,
    /// Fraction of replicas in `{||Z||_{0;T} <= M}`.
    pub event_fraction: f64,
    pub estimates: Vec<MomentEstimate>,
    /// Empirical survival function `(x, P(||X||_{0,T,inf} > x))`.
    pub survival: Vec<(f64, f64)>,
    pub criteria: Vec<CriterionOutcome>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioLevel {
    pub epsilon: f64,
    /// `E ||Y1 - Y2||_{inf,T}^p 1_A`
    pub numerator: f64,
    /// `E ||Z1 - Z2||_{0;T}^p 1_A`
    pub denominator: f64,
    /// `None` when the denominator vanishes.
    pub ratio: Option<f64>,
    /// Replicas inside the truncation event `A`.
    pub event_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiReport {
    pub version: String,
    pub kind: String,
    pub config: ExperimentConfig,
    pub seeds: SeedRecord,
    pub p: f64,
    pub levels: Vec<RatioLevel>,
    /// `max ratio / min ratio` over the levels with a positive ratio.
    pub spread: Option<f64>,
    /// Some truncation event was empty.
    pub inconclusive: bool,
    /// The ratio rises at every shrinking step and by more than a factor 10 overall.
    pub unbounded_growth: bool,
    pub criteria: Vec<CriterionOutcome>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Report {
    Convergence(ConvergenceReport),
    Moment(MomentReport),
    Quasi(QuasiReport),
}

impl Report {
    pub fn passed(&self) -> bool {
        match self {
            Report::Convergence(r) => r.passed,
            Report::Moment(r) => r.passed,
            Report::Quasi(r) => r.passed,
        }
    }

    pub fn criteria(&self) -> &[CriterionOutcome] {
        match self {
            Report::Convergence(r) => &r.criteria,
            Report::Moment(r) => &r.criteria,
            Report::Quasi(r) => &r.criteria,
        }
    }

    /// Pretty JSON followed by a newline; a pure function of the report.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
