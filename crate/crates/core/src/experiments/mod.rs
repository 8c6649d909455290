//! Monte Carlo experiments turning the convergence and moment statements for
//! mixed delay equations into pre-registered statistical checks.
//!
//! Replica `i` draws its drivers from stream `(master_seed, i)` on the finest grid
//! of the experiment; every level reads restrictions of the same paths. Results
//! are reduced in replica order, so reports do not depend on the worker count.

mod config;
mod convergence;
mod moments;
mod report;
mod stats;

use rayon::prelude::*;
use thiserror::Error;

use crate::driver::{sample_wiener, DriverError, FbmMethod, FbmParams, FbmSampler, SeedSpec};
use crate::fraccalc::FracError;
use crate::path::{GridPath, PathError};
use crate::sdde::{InitialCondition, SddeError};
use crate::solver::SolverError;

pub use config::{
    default_quasi_p, CoeffConvergence, ConvergenceCriteria, EulerRefinement, ExperimentConfig, ExperimentKind, ItoLimit,
    MomentCriteria, Moments, OracleCriterion, Perturbation, QuasiContract, QuasiCriteria, SlopeCriterion, StabilityCriterion,
    VanishingDelay,
};
pub use convergence::{run_coefficient_convergence, run_euler_refinement, run_ito_limit, run_vanishing_delay};
pub use moments::{estimate_moments, estimate_quasi_contractivity, lognormal_moment};
pub use report::{
    version_string, ConvergenceReport, CriterionOutcome, LevelSummary, MomentEstimate, MomentReport, QuasiReport, RatioLevel,
    Report, SeedRecord,
};
pub use stats::{
    estimate_exceedance, first_disjoint_increase, log_log_slope, mean, median, non_increasing_steps, standard_error,
    survival_curve, top_share, wilson_interval, Exceedance, MIN_SAMPLES, Z_95,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Sdde(#[from] SddeError),
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("replica {replica} ({stage}): {source}")]
    Replica {
        replica: usize,
        stage: String,
        source: SolverError,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl ExperimentError {
    /// Whether a solve diverged past its explosion threshold.
    pub fn is_explosion(&self) -> bool {
        matches!(
            self,
            ExperimentError::Replica {
                source: SolverError::Explosion { .. },
                ..
            }
        )
    }
}

/// Runs the experiment selected by `cfg` on `workers` threads.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Report, ExperimentError> {
    Ok(match cfg.experiment {
        ExperimentKind::CoeffConvergence(_) => Report::Convergence(run_coefficient_convergence(cfg, workers)?),
        ExperimentKind::VanishingDelay(_) => Report::Convergence(run_vanishing_delay(cfg, workers)?),
        ExperimentKind::EulerRefinement(_) => Report::Convergence(run_euler_refinement(cfg, workers)?),
        ExperimentKind::ItoLimit(_) => Report::Convergence(run_ito_limit(cfg, workers)?),
        ExperimentKind::Moments(_) => Report::Moment(estimate_moments(cfg, workers)?),
        ExperimentKind::QuasiContract(_) => Report::Quasi(estimate_quasi_contractivity(cfg, workers)?),
    })
}

/// `f(0), ..., f(count - 1)` evaluated on `workers` threads and returned in index
/// order; the first failure in index order wins.
pub(crate) fn map_replicas<T, F>(workers: usize, count: usize, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(usize) -> Result<T, ExperimentError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let results: Vec<Result<T, ExperimentError>> = pool.install(|| (0..count).into_par_iter().map(&f).collect());
    results.into_iter().collect()
}

/// Wiener and fractional drivers of one replica on the finest grid.
pub(crate) struct Drivers {
    pub w: GridPath,
    pub z: GridPath,
}

pub(crate) struct DriverSource {
    sampler: FbmSampler,
    master_seed: u64,
    n_wiener: usize,
    n_fractional: usize,
}

impl DriverSource {
    /// Sampler on `steps` cells of `[0, T]`; absent driver families get one dummy coordinate.
    pub fn new(cfg: &ExperimentConfig, steps: usize) -> Result<Self, ExperimentError> {
        let method = cfg.fbm_method.unwrap_or_else(|| FbmMethod::auto(steps));
        let sampler = FbmSampler::new(FbmParams::new(cfg.holder.hurst, steps, cfg.horizon, method)?)?;
        Ok(Self {
            sampler,
            master_seed: cfg.master_seed,
            n_wiener: cfg.spec.n_wiener().max(1),
            n_fractional: cfg.spec.n_fractional().max(1),
        })
    }

    pub fn sample(&self, replica: usize) -> Result<Drivers, ExperimentError> {
        let seed = SeedSpec::new(self.master_seed, replica as u64);
        let p = self.sampler.params();
        Ok(Drivers {
            w: sample_wiener(p.n_steps, p.horizon, self.n_wiener, seed)?,
            z: self.sampler.sample_multi(seed, self.n_fractional),
        })
    }
}

/// `eta = x0 (+ shift)` on `[-r, 0]` with step `dt`.
pub(crate) fn constant_initial(x0: &[f64], delay: f64, dt: f64, shift: f64) -> Result<InitialCondition, ExperimentError> {
    let shifted: Vec<f64> = x0.iter().map(|v| v + shift).collect();
    Ok(InitialCondition::constant(&shifted, delay, dt)?)
}

pub(crate) fn seeds(cfg: &ExperimentConfig, finest_steps: usize) -> SeedRecord {
    SeedRecord {
        master_seed: cfg.master_seed,
        replicas: cfg.replicas,
        finest_steps,
    }
}

/// Tags a solver failure with the replica and stage it happened in.
pub(crate) fn at_replica(replica: usize, stage: impl Into<String>) -> impl FnOnce(SolverError) -> ExperimentError {
    let stage = stage.into();
    move |source| ExperimentError::Replica { replica, stage, source }
}
