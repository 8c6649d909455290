//! Single solves from a config file.

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::driver::{sample_wiener, FbmMethod, FbmParams, FbmSampler, SeedSpec};
use crate::path::GridPath;
use crate::sdde::{CoefficientSpec, HolderParams, InitialCondition};
use crate::solver::{
    euler_ito_sdde, euler_mixed_sdde, MollifiedDrift, MollifierParams, Scheme, SolverConfig, SpecDiffusion,
    DEFAULT_EXPLOSION_THRESHOLD,
};

fn default_threshold() -> f64 {
    DEFAULT_EXPLOSION_THRESHOLD
}

/// One path of one equation, driven by stream `(master_seed, stream)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub master_seed: u64,
    #[serde(default)]
    pub stream: u64,
    pub horizon: f64,
    pub n_steps: usize,
    pub holder: HolderParams,
    pub spec: CoefficientSpec,
    /// Constant initial value on `[-r, 0]`.
    pub x0: Vec<f64>,
    pub scheme: Scheme,
    /// Level `N` of the mollified drift, required by `euler_ito`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollifier_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fbm_method: Option<FbmMethod>,
    #[serde(default = "default_threshold")]
    pub explosion_threshold: f64,
}

impl SolveConfig {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            n_steps: self.n_steps,
            horizon: self.horizon,
            explosion_threshold: self.explosion_threshold,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |msg: String| Err(CliError::Validation(msg));
        self.holder.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        self.spec.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        self.solver().validate().map_err(|e| CliError::Validation(e.to_string()))?;
        if self.n_steps < 2 {
            return invalid(format!("n_steps must be at least 2, got {}", self.n_steps));
        }
        if self.x0.len() != self.spec.dim {
            return invalid(format!("x0 has {} entries but the state dimension is {}", self.x0.len(), self.spec.dim));
        }
        match (self.scheme, self.mollifier_level) {
            (Scheme::EulerIto, None) => return invalid("scheme euler_ito needs mollifier_level".into()),
            (Scheme::EulerMixed, Some(_)) => return invalid("mollifier_level only applies to scheme euler_ito".into()),
            (Scheme::EulerIto, Some(n)) => {
                let params = MollifierParams::new(n).map_err(|e| CliError::Validation(e.to_string()))?;
                params
                    .check_grid(self.solver().dt())
                    .map_err(|e| CliError::Validation(e.to_string()))?;
            }
            (Scheme::EulerMixed, None) => {}
        }
        Ok(())
    }
}

/// The solution path on `[-r, T]`.
pub fn solve(cfg: &SolveConfig) -> Result<GridPath, CliError> {
    cfg.validate()?;
    let spec = &cfg.spec;
    let solver = cfg.solver();
    let seed = SeedSpec::new(cfg.master_seed, cfg.stream);
    let method = cfg.fbm_method.unwrap_or_else(|| FbmMethod::auto(cfg.n_steps));
    let params = FbmParams::new(cfg.holder.hurst, cfg.n_steps, cfg.horizon, method).map_err(|e| CliError::Validation(e.to_string()))?;
    let sampler = FbmSampler::new(params).map_err(|e| CliError::Numerical(e.to_string()))?;
    let z = sampler.sample_multi(seed, spec.n_fractional().max(1));
    let w = sample_wiener(cfg.n_steps, cfg.horizon, spec.n_wiener().max(1), seed).map_err(|e| CliError::Validation(e.to_string()))?;
    let eta = InitialCondition::constant(&cfg.x0, spec.delay, solver.dt()).map_err(|e| CliError::Validation(e.to_string()))?;
    let out = match cfg.mollifier_level {
        None => euler_mixed_sdde(spec, &eta, &w, &z, &solver),
        Some(level) => {
            let drift = MollifiedDrift {
                spec,
                params: MollifierParams::new(level).map_err(|e| CliError::Validation(e.to_string()))?,
            };
            euler_ito_sdde(&drift, &SpecDiffusion(spec), &eta, spec.delay, &w, Some(&z), &solver)
        }
    };
    out.map_err(CliError::from)
}
