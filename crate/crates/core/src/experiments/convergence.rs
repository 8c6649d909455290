//! Coupled-path convergence studies: every level of a replica is compared with a
//! reference solution driven by the same Wiener and fractional paths.

use super::config::{ConvergenceCriteria, ExperimentConfig, ExperimentKind, Perturbation, REFERENCE_REFINEMENT};
use super::report::{ConvergenceReport, CriterionOutcome, LevelSummary};
use super::stats::{estimate_exceedance, first_disjoint_increase, log_log_slope, mean, median, non_increasing_steps};
use super::{at_replica, constant_initial, map_replicas, seeds, DriverSource, ExperimentError};
use crate::path::sup_distance;
use crate::sdde::{CoefficientSpec, InitialCondition};
use crate::solver::{
    euler_ito_sdde, euler_mixed_sdde, geometric_closed_form, MollifiedDrift, MollifierParams, SolverConfig, SpecDiffusion,
};

fn solver_config(cfg: &ExperimentConfig, n_steps: usize) -> Result<SolverConfig, ExperimentError> {
    let s = SolverConfig {
        n_steps,
        horizon: cfg.horizon,
        explosion_threshold: cfg.explosion_threshold,
    };
    s.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
    Ok(s)
}

fn wrong_kind(expected: &str, cfg: &ExperimentConfig) -> ExperimentError {
    ExperimentError::Config(format!("expected a {expected} experiment, got {}", cfg.experiment.name()))
}

/// Per-level summaries from per-replica distance rows.
fn summarize(levels: &[f64], rows: &[Vec<f64>], epsilon: f64) -> Result<Vec<LevelSummary>, ExperimentError> {
    levels
        .iter()
        .enumerate()
        .map(|(j, &level)| {
            let distances: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            Ok(LevelSummary {
                level,
                exceedance: estimate_exceedance(&distances, epsilon)?,
                mean_distance: mean(&distances),
                median_distance: median(&distances),
                distances,
            })
        })
        .collect()
}

fn evaluate(criteria: &ConvergenceCriteria, levels: &[LevelSummary], slope: Option<f64>) -> Vec<CriterionOutcome> {
    let mut out = Vec::new();
    let means: Vec<f64> = levels.iter().map(|l| l.mean_distance).collect();
    if let Some(bound) = criteria.max_final_exceedance {
        let last = levels.last().expect("at least one level").exceedance;
        out.push(CriterionOutcome::new(
            "final_exceedance",
            last.estimate < bound,
            format!("P(distance > {}) = {} at the last level, bound {bound}", last.epsilon, last.estimate),
        ));
    }
    if criteria.exceedance_monotone {
        let ex: Vec<_> = levels.iter().map(|l| l.exceedance).collect();
        let detail = match first_disjoint_increase(&ex) {
            None => "no rise with disjoint intervals".to_string(),
            Some(i) => format!(
                "estimate rises from {} to {} between levels {} and {} with disjoint intervals",
                ex[i].estimate,
                ex[i + 1].estimate,
                levels[i].level,
                levels[i + 1].level
            ),
        };
        out.push(CriterionOutcome::new("exceedance_monotone", first_disjoint_increase(&ex).is_none(), detail));
    }
    if let Some(k) = criteria.min_mean_non_increasing {
        let steps = non_increasing_steps(&means);
        out.push(CriterionOutcome::new(
            "mean_non_increasing",
            steps >= k,
            format!("{steps} of {} steps non-increasing, need {k}", means.len().saturating_sub(1)),
        ));
    }
    if criteria.mean_strictly_decreasing {
        let ok = means.windows(2).all(|w| w[1] < w[0]);
        out.push(CriterionOutcome::new("mean_strictly_decreasing", ok, format!("mean distances {means:?}")));
    }
    if criteria.zero_distance {
        let worst = levels.iter().flat_map(|l| &l.distances).fold(0.0f64, |a, &b| a.max(b));
        out.push(CriterionOutcome::new("zero_distance", worst == 0.0, format!("largest distance {worst}")));
    }
    if let Some(s) = criteria.slope {
        let (ok, detail) = match slope {
            Some(v) => ((v - s.expected).abs() <= s.tolerance, format!("slope {v}, expected {} +- {}", s.expected, s.tolerance)),
            None => (false, "slope undefined (a mean distance is zero)".into()),
        };
        out.push(CriterionOutcome::new("slope", ok, detail));
    }
    out
}

fn finish(
    cfg: ExperimentConfig,
    reference: &str,
    finest_steps: usize,
    levels: Vec<f64>,
    rows: Vec<Vec<f64>>,
    epsilon: f64,
    criteria: &ConvergenceCriteria,
) -> Result<ConvergenceReport, ExperimentError> {
    let summaries = summarize(&levels, &rows, epsilon)?;
    let means: Vec<f64> = summaries.iter().map(|l| l.mean_distance).collect();
    let slope = log_log_slope(&levels, &means);
    let outcomes = evaluate(criteria, &summaries, slope);
    Ok(ConvergenceReport {
        version: super::version_string(),
        kind: cfg.experiment.name().into(),
        seeds: seeds(&cfg, finest_steps),
        passed: outcomes.iter().all(|c| c.passed),
        config: cfg,
        reference: reference.into(),
        levels: summaries,
        slope,
        criteria: outcomes,
    })
}

/// Perturbed coefficients `(a^n, b, c)` or initial condition `eta^n` against the base equation.
pub fn run_coefficient_convergence(cfg: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport, ExperimentError> {
    let cfg = cfg.resolved()?;
    let ExperimentKind::CoeffConvergence(ex) = &cfg.experiment else {
        return Err(wrong_kind("coeff_convergence", &cfg));
    };
    let solver = solver_config(&cfg, ex.n_steps)?;
    let spec = &cfg.spec;
    let base_eta = constant_initial(&cfg.x0, spec.delay, solver.dt(), 0.0)?;
    let variants: Vec<(CoefficientSpec, InitialCondition)> = ex
        .levels
        .iter()
        .map(|&n| {
            let size = |scale: f64| scale / n as f64;
            Ok(match ex.perturbation {
                Perturbation::None => (spec.clone(), base_eta.clone()),
                Perturbation::DriftShift { scale } => (spec.shift_drift(size(scale)), base_eta.clone()),
                Perturbation::GainShift { scale } => (spec.shift_drift_gain(size(scale)), base_eta.clone()),
                Perturbation::InitialShift { scale } => {
                    (spec.clone(), constant_initial(&cfg.x0, spec.delay, solver.dt(), size(scale))?)
                }
            })
        })
        .collect::<Result<_, ExperimentError>>()?;
    let source = DriverSource::new(&cfg, ex.n_steps)?;
    let rows = map_replicas(workers, cfg.replicas, |i| {
        let d = source.sample(i)?;
        let x0 = euler_mixed_sdde(spec, &base_eta, &d.w, &d.z, &solver).map_err(at_replica(i, "unperturbed equation"))?;
        ex.levels
            .iter()
            .zip(&variants)
            .map(|(n, (s, eta))| {
                let x = euler_mixed_sdde(s, eta, &d.w, &d.z, &solver).map_err(at_replica(i, format!("level {n}")))?;
                Ok(sup_distance(&x, &x0, x0.t0(), cfg.horizon)?)
            })
            .collect::<Result<Vec<f64>, ExperimentError>>()
    })?;
    let levels = ex.levels.iter().map(|&n| n as f64).collect();
    let (epsilon, criteria) = (ex.epsilon, ex.criteria.clone());
    finish(cfg.clone(), "unperturbed equation", ex.n_steps, levels, rows, epsilon, &criteria)
}

/// Delay `tau_n` against the no-delay limit `a(s, x, x)` of a pointwise-delay equation.
pub fn run_vanishing_delay(cfg: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport, ExperimentError> {
    let cfg = cfg.resolved()?;
    let ExperimentKind::VanishingDelay(ex) = &cfg.experiment else {
        return Err(wrong_kind("vanishing_delay", &cfg));
    };
    let solver = solver_config(&cfg, ex.n_steps)?;
    let spec = &cfg.spec;
    let eta = constant_initial(&cfg.x0, spec.delay, solver.dt(), 0.0)?;
    let limit = spec.collapse_delay();
    let delayed: Vec<CoefficientSpec> = ex.taus.iter().map(|&tau| spec.with_tau(tau)).collect();
    let source = DriverSource::new(&cfg, ex.n_steps)?;
    let rows = map_replicas(workers, cfg.replicas, |i| {
        let d = source.sample(i)?;
        let x0 = euler_mixed_sdde(&limit, &eta, &d.w, &d.z, &solver).map_err(at_replica(i, "no-delay limit"))?;
        ex.taus
            .iter()
            .zip(&delayed)
            .map(|(tau, s)| {
                let x = euler_mixed_sdde(s, &eta, &d.w, &d.z, &solver).map_err(at_replica(i, format!("tau {tau}")))?;
                Ok(sup_distance(&x, &x0, 0.0, cfg.horizon)?)
            })
            .collect::<Result<Vec<f64>, ExperimentError>>()
    })?;
    let (epsilon, criteria, levels) = (ex.epsilon, ex.criteria.clone(), ex.taus.clone());
    finish(cfg.clone(), "no-delay limit a(s, x, x)", ex.n_steps, levels, rows, epsilon, &criteria)
}

/// Euler meshes `n` against the closed-form solution when available, otherwise
/// against Euler on a mesh [`REFERENCE_REFINEMENT`] times finer than the finest level.
pub fn run_euler_refinement(cfg: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport, ExperimentError> {
    let cfg = cfg.resolved()?;
    let ExperimentKind::EulerRefinement(ex) = &cfg.experiment else {
        return Err(wrong_kind("euler_refinement", &cfg));
    };
    let spec = &cfg.spec;
    let closed = cfg.closed_form();
    let finest = cfg.finest_steps();
    let reference_cfg = solver_config(&cfg, finest)?;
    let reference_eta = constant_initial(&cfg.x0, spec.delay, reference_cfg.dt(), 0.0)?;
    let meshes: Vec<(SolverConfig, InitialCondition)> = ex
        .levels
        .iter()
        .map(|&n| {
            let s = solver_config(&cfg, n)?;
            let eta = constant_initial(&cfg.x0, spec.delay, s.dt(), 0.0)?;
            Ok((s, eta))
        })
        .collect::<Result<_, ExperimentError>>()?;
    let source = DriverSource::new(&cfg, finest)?;
    let rows = map_replicas(workers, cfg.replicas, |i| {
        let d = source.sample(i)?;
        let reference = match closed {
            Some((a, b, c)) => geometric_closed_form(a, b, c, cfg.x0[0], &d.w, &d.z).map_err(at_replica(i, "closed form"))?,
            None => euler_mixed_sdde(spec, &reference_eta, &d.w, &d.z, &reference_cfg).map_err(at_replica(i, "reference mesh"))?,
        };
        meshes
            .iter()
            .map(|(s, eta)| {
                let x = euler_mixed_sdde(spec, eta, &d.w, &d.z, s).map_err(at_replica(i, format!("mesh {}", s.n_steps)))?;
                Ok(sup_distance(&x, &reference, 0.0, cfg.horizon)?)
            })
            .collect::<Result<Vec<f64>, ExperimentError>>()
    })?;
    let reference = match closed {
        Some(_) => "closed form x0 exp((a - b^2/2) t + b W + c Z)".to_string(),
        None => format!("no closed form; Euler on mesh {finest} ({REFERENCE_REFINEMENT}x the finest level, self-referential proxy)"),
    };
    let levels = ex.levels.iter().map(|&n| n as f64).collect();
    let (epsilon, criteria) = (ex.epsilon, ex.criteria.clone());
    finish(cfg.clone(), &reference, finest, levels, rows, epsilon, &criteria)
}

/// Itô solutions with the mollified drift `a + c dZ^N/dt` against the mixed Euler solution.
pub fn run_ito_limit(cfg: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport, ExperimentError> {
    let cfg = cfg.resolved()?;
    let ExperimentKind::ItoLimit(ex) = &cfg.experiment else {
        return Err(wrong_kind("ito_limit", &cfg));
    };
    let solver = solver_config(&cfg, ex.n_steps)?;
    let spec = &cfg.spec;
    let eta = constant_initial(&cfg.x0, spec.delay, solver.dt(), 0.0)?;
    let drifts: Vec<MollifiedDrift<'_>> = ex
        .levels
        .iter()
        .map(|&n| {
            let params = MollifierParams::new(n).map_err(|e| ExperimentError::Config(e.to_string()))?;
            params.check_grid(solver.dt()).map_err(|e| ExperimentError::Config(e.to_string()))?;
            Ok(MollifiedDrift { spec, params })
        })
        .collect::<Result<_, ExperimentError>>()?;
    let source = DriverSource::new(&cfg, ex.n_steps)?;
    let rows = map_replicas(workers, cfg.replicas, |i| {
        let d = source.sample(i)?;
        let mixed = euler_mixed_sdde(spec, &eta, &d.w, &d.z, &solver).map_err(at_replica(i, "mixed equation"))?;
        drifts
            .iter()
            .map(|drift| {
                let y = euler_ito_sdde(drift, &SpecDiffusion(spec), &eta, spec.delay, &d.w, Some(&d.z), &solver)
                    .map_err(at_replica(i, format!("mollifier level {}", drift.params.level)))?;
                Ok(sup_distance(&y, &mixed, mixed.t0(), cfg.horizon)?)
            })
            .collect::<Result<Vec<f64>, ExperimentError>>()
    })?;
    let levels = ex.levels.iter().map(|&n| n as f64).collect();
    let (epsilon, criteria) = (ex.epsilon, ex.criteria.clone());
    finish(cfg.clone(), "mixed Euler solution on the same grid", ex.n_steps, levels, rows, epsilon, &criteria)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{CoeffConvergence, EulerRefinement, ItoLimit, VanishingDelay};
    use crate::sdde::{AffineMap, Family, Gain, HolderParams};
    use crate::solver::DEFAULT_EXPLOSION_THRESHOLD;

    fn base(spec: CoefficientSpec, replicas: usize, experiment: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            master_seed: 11,
            replicas,
            horizon: 1.0,
            holder: HolderParams::new(0.75, 0.7, 0.35, 0.9, 0.45).unwrap(),
            spec,
            x0: vec![1.0],
            fbm_method: None,
            explosion_threshold: DEFAULT_EXPLOSION_THRESHOLD,
            experiment,
        }
    }

    fn delay_spec(a_delay: f64, b_delay: f64) -> CoefficientSpec {
        let mut spec = CoefficientSpec::geometric(0.3, 0.0, 0.2);
        spec.family = Family::PointwiseDelay;
        spec.delay = 0.5;
        spec.drift = AffineMap::scalar_gain(0.3).with_tap(0.5, Gain::Scalar(a_delay));
        spec.diffusion = vec![AffineMap::zero().with_tap(0.5, Gain::Scalar(b_delay))];
        spec
    }

    #[test]
    fn zero_perturbation_gives_zero_distance() {
        let cfg = base(
            CoefficientSpec::geometric(0.5, 0.4, 0.3),
            30,
            ExperimentKind::CoeffConvergence(CoeffConvergence {
                levels: vec![1, 2, 4],
                perturbation: Perturbation::None,
                n_steps: 64,
                epsilon: 0.1,
                criteria: ConvergenceCriteria {
                    zero_distance: true,
                    ..Default::default()
                },
            }),
        );
        let r = run_coefficient_convergence(&cfg, 2).unwrap();
        assert!(r.passed);
        assert!(r.levels.iter().all(|l| l.exceedance.estimate == 0.0 && l.mean_distance == 0.0));
        assert_eq!(r.slope, None);
    }

    #[test]
    fn initial_shift_decays_like_one_over_n() {
        let cfg = base(
            CoefficientSpec::geometric(0.5, 0.4, 0.3),
            40,
            ExperimentKind::CoeffConvergence(CoeffConvergence {
                levels: vec![1, 2, 4, 8, 16, 32, 64],
                perturbation: Perturbation::InitialShift { scale: 1.0 },
                n_steps: 64,
                epsilon: 0.1,
                criteria: ConvergenceCriteria {
                    slope: Some(crate::experiments::SlopeCriterion {
                        expected: -1.0,
                        tolerance: 0.3,
                    }),
                    ..Default::default()
                },
            }),
        );
        let r = run_coefficient_convergence(&cfg, 4).unwrap();
        assert!(r.passed, "{:?}", r.criteria);
    }

    #[test]
    fn delay_free_coefficients_give_zero_distance() {
        // taps with zero gain: the delayed argument never matters
        let cfg = base(
            delay_spec(0.0, 0.0),
            30,
            ExperimentKind::VanishingDelay(VanishingDelay {
                taus: vec![0.5, 0.25, 0.125],
                n_steps: 64,
                epsilon: 0.1,
                criteria: ConvergenceCriteria {
                    zero_distance: true,
                    ..Default::default()
                },
            }),
        );
        let r = run_vanishing_delay(&cfg, 3).unwrap();
        assert!(r.passed, "{:?}", r.criteria);
    }

    #[test]
    fn constant_history_and_coefficients_ignore_tau() {
        let mut spec = CoefficientSpec::geometric(0.0, 0.0, 0.0);
        spec.family = Family::PointwiseDelay;
        spec.delay = 0.5;
        spec.drift = AffineMap::constant(vec![0.2]);
        spec.diffusion = vec![AffineMap::constant(vec![0.1])];
        spec.fractional = vec![AffineMap::constant(vec![0.3]).with_tap(0.5, Gain::Scalar(0.0))];
        let cfg = base(
            spec,
            30,
            ExperimentKind::VanishingDelay(VanishingDelay {
                taus: vec![0.5, 0.25],
                n_steps: 32,
                epsilon: 0.1,
                criteria: ConvergenceCriteria {
                    zero_distance: true,
                    ..Default::default()
                },
            }),
        );
        assert!(run_vanishing_delay(&cfg, 1).unwrap().passed);
    }

    #[test]
    fn euler_error_of_deterministic_exponential() {
        // x' = x: the global Euler error at T = 1 is e/(2n) to leading order
        let cfg = base(
            CoefficientSpec::geometric(1.0, 0.0, 0.0),
            30,
            ExperimentKind::EulerRefinement(EulerRefinement {
                levels: vec![64, 128, 256],
                epsilon: 0.1,
                criteria: ConvergenceCriteria::default(),
            }),
        );
        let r = run_euler_refinement(&cfg, 2).unwrap();
        assert!(r.reference.starts_with("closed form"));
        for l in &r.levels {
            let oracle = std::f64::consts::E / (2.0 * l.level);
            assert!(l.mean_distance > 0.5 * oracle && l.mean_distance < 2.0 * oracle, "{} vs {oracle}", l.mean_distance);
        }
    }

    #[test]
    fn zero_coefficients_have_zero_error() {
        let cfg = base(
            CoefficientSpec::geometric(0.0, 0.0, 0.0),
            30,
            ExperimentKind::EulerRefinement(EulerRefinement {
                levels: vec![16, 32],
                epsilon: 0.1,
                criteria: ConvergenceCriteria {
                    zero_distance: true,
                    ..Default::default()
                },
            }),
        );
        assert!(run_euler_refinement(&cfg, 2).unwrap().passed);
    }

    #[test]
    fn delay_equation_uses_fine_euler_reference() {
        let cfg = base(
            delay_spec(0.2, 0.1),
            30,
            ExperimentKind::EulerRefinement(EulerRefinement {
                levels: vec![16, 32, 64],
                epsilon: 0.1,
                criteria: ConvergenceCriteria::default(),
            }),
        );
        let r = run_euler_refinement(&cfg, 2).unwrap();
        assert_eq!(r.seeds.finest_steps, 256);
        assert!(r.reference.contains("self-referential"));
        assert!(r.levels[2].mean_distance < r.levels[0].mean_distance);
    }

    #[test]
    fn ito_limit_without_fractional_term_is_exact() {
        let cfg = base(
            CoefficientSpec::geometric(0.5, 0.4, 0.0),
            30,
            ExperimentKind::ItoLimit(ItoLimit {
                levels: vec![4, 16],
                n_steps: 256,
                epsilon: 0.1,
                criteria: ConvergenceCriteria {
                    zero_distance: true,
                    ..Default::default()
                },
            }),
        );
        assert!(run_ito_limit(&cfg, 2).unwrap().passed);
    }

    #[test]
    fn reports_do_not_depend_on_workers() {
        let cfg = base(
            CoefficientSpec::geometric(0.5, 0.4, 0.3),
            32,
            ExperimentKind::CoeffConvergence(CoeffConvergence {
                levels: vec![1, 4],
                perturbation: Perturbation::DriftShift { scale: 1.0 },
                n_steps: 64,
                epsilon: 0.1,
                criteria: ConvergenceCriteria::default(),
            }),
        );
        let one = run_coefficient_convergence(&cfg, 1).unwrap();
        let many = run_coefficient_convergence(&cfg, 8).unwrap();
        assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&many).unwrap());
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let cfg = base(
            CoefficientSpec::geometric(0.5, 0.4, 0.3),
            30,
            ExperimentKind::EulerRefinement(EulerRefinement {
                levels: vec![16],
                epsilon: 0.1,
                criteria: ConvergenceCriteria::default(),
            }),
        );
        assert!(matches!(run_ito_limit(&cfg, 1), Err(ExperimentError::Config(_))));
    }
}
