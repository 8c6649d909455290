//! Moment estimates of the solution and the empirical quasi-contractivity ratio.

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{CriterionOutcome, MomentEstimate, MomentReport, QuasiReport, RatioLevel};
use super::stats::{mean, standard_error, survival_curve, top_share};
use super::{at_replica, constant_initial, map_replicas, seeds, DriverSource, ExperimentError};
use crate::fraccalc::{delay_norms, vector_seminorm_0_alpha};
use crate::path::{sup_distance, GridPath};
use crate::solver::{euler_mixed_sdde, SolverConfig};

/// Share of a moment estimate above which the top 1% of the sample raises the heavy-tail alarm.
const HEAVY_TAIL_SHARE: f64 = 0.5;

/// Points of the reported survival function.
const SURVIVAL_POINTS: usize = 50;

/// `E X(T)^p` for `X = x0 exp((a - b^2/2) T + b W(T) + c Z(T))` with `Var Z(T) = T^{2H}`.
pub fn lognormal_moment(a: f64, b: f64, c: f64, x0: f64, horizon: f64, hurst: f64, p: f64) -> f64 {
    let variance = b * b * horizon + c * c * horizon.powf(2.0 * hurst);
    x0.abs().powf(p) * (p * (a - 0.5 * b * b) * horizon + 0.5 * p * p * variance).exp()
}

fn solver_config(cfg: &ExperimentConfig, n_steps: usize) -> Result<SolverConfig, ExperimentError> {
    let s = SolverConfig {
        n_steps,
        horizon: cfg.horizon,
        explosion_threshold: cfg.explosion_threshold,
    };
    s.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
    Ok(s)
}

/// Norms of one replica.
struct Sample {
    /// `||X||_{0,T,inf}`
    sup: f64,
    /// `|X(T)|`
    terminal: f64,
    /// `||X||_T`
    delay_norm: f64,
    /// `||Z||_{0;T}`
    driver_norm: f64,
}

/// `E ||X||^p` (sup and delay norms, with and without truncation) across `p`.
pub fn estimate_moments(cfg: &ExperimentConfig, workers: usize) -> Result<MomentReport, ExperimentError> {
    let cfg = cfg.resolved()?;
    let ExperimentKind::Moments(ex) = &cfg.experiment else {
        return Err(ExperimentError::Config(format!("expected a moments experiment, got {}", cfg.experiment.name())));
    };
    let solver = solver_config(&cfg, ex.n_steps)?;
    let spec = &cfg.spec;
    let (alpha, r, horizon) = (cfg.holder.alpha, spec.delay, cfg.horizon);
    let eta = constant_initial(&cfg.x0, r, solver.dt(), 0.0)?;
    let source = DriverSource::new(&cfg, ex.n_steps)?;
    let samples = map_replicas(workers, cfg.replicas, |i| {
        let d = source.sample(i)?;
        let x = euler_mixed_sdde(spec, &eta, &d.w, &d.z, &solver).map_err(at_replica(i, "solve"))?;
        Ok(Sample {
            sup: x.sup_norm(),
            terminal: crate::path::euclid(x.node(x.len() - 1)),
            delay_norm: delay_norms(&x, alpha, r, horizon)?.norm_t,
            driver_norm: vector_seminorm_0_alpha(&d.z, alpha, Some((0.0, horizon)))?,
        })
    })?;
    let inside: Vec<bool> = samples.iter().map(|s| s.driver_norm <= ex.m_trunc).collect();
    let half = cfg.replicas / 2;
    let closed = cfg.closed_form();
    let estimates: Vec<MomentEstimate> = ex
        .p
        .iter()
        .map(|&p| {
            let sup: Vec<f64> = samples.iter().map(|s| s.sup.powf(p)).collect();
            let terminal: Vec<f64> = samples.iter().map(|s| s.terminal.powf(p)).collect();
            let truncated: Vec<f64> = samples
                .iter()
                .zip(&inside)
                .map(|(s, &ok)| if ok { s.delay_norm.powf(p) } else { 0.0 })
                .collect();
            let share = top_share(&sup, 0.01);
            MomentEstimate {
                p,
                sup_moment: mean(&sup),
                sup_standard_error: standard_error(&sup),
                half_sample_sup_moment: mean(&sup[..half]),
                truncated_moment: mean(&truncated),
                truncated_standard_error: standard_error(&truncated),
                terminal_moment: mean(&terminal),
                terminal_standard_error: standard_error(&terminal),
                oracle: closed.map(|(a, b, c)| lognormal_moment(a, b, c, cfg.x0[0], horizon, cfg.holder.hurst, p)),
                top_percent_share: share,
                heavy_tail: share > HEAVY_TAIL_SHARE,
            }
        })
        .collect();

    let find = |p: f64| estimates.iter().find(|e| e.p == p).expect("validated moment order");
    let mut criteria = Vec::new();
    if let Some(o) = ex.criteria.oracle {
        let e = find(o.p);
        let oracle = e.oracle.expect("validated closed form");
        let k = o.standard_errors;
        let terminal_ok = (e.terminal_moment - oracle).abs() <= k * e.terminal_standard_error;
        let sup_ok = e.sup_moment >= oracle - k * e.sup_standard_error;
        criteria.push(CriterionOutcome::new(
            "lognormal_oracle",
            terminal_ok && sup_ok,
            format!(
                "p = {}: terminal {} +- {} and sup {} +- {} against oracle {oracle} ({k} standard errors)",
                o.p, e.terminal_moment, e.terminal_standard_error, e.sup_moment, e.sup_standard_error
            ),
        ));
    }
    if let Some(s) = ex.criteria.stability {
        let e = find(s.p);
        let change = (e.sup_moment - e.half_sample_sup_moment).abs() / e.sup_moment;
        criteria.push(CriterionOutcome::new(
            "sample_size_stability",
            change < s.max_relative_change,
            format!(
                "p = {}: {} on {half} replicas, {} on {}; relative change {change}, bound {}",
                s.p, e.half_sample_sup_moment, e.sup_moment, cfg.replicas, s.max_relative_change
            ),
        ));
    }
    if ex.criteria.fail_on_heavy_tail {
        let flagged: Vec<f64> = estimates.iter().filter(|e| e.heavy_tail).map(|e| e.p).collect();
        criteria.push(CriterionOutcome::new(
            "no_heavy_tail",
            flagged.is_empty(),
            format!("heavy-tail alarm at p = {flagged:?}"),
        ));
    }
    let sups: Vec<f64> = samples.iter().map(|s| s.sup).collect();
    Ok(MomentReport {
        version: super::version_string(),
        kind: cfg.experiment.name().into(),
        seeds: seeds(&cfg, ex.n_steps),
        event_fraction: inside.iter().filter(|&&b| b).count() as f64 / cfg.replicas as f64,
        estimates,
        survival: survival_curve(&sups, SURVIVAL_POINTS),
        passed: criteria.iter().all(|c| c.passed),
        criteria,
        config: cfg.clone(),
    })
}

/// `Z + eps t` on the grid of `z`.
fn shifted_driver(z: &GridPath, eps: f64) -> Result<GridPath, ExperimentError> {
    let d = z.dim();
    let mut values = z.values().to_vec();
    for (k, node) in values.chunks_exact_mut(d).enumerate() {
        let t = z.time(k);
        node.iter_mut().for_each(|v| *v += eps * t);
    }
    Ok(GridPath::new(z.t0(), z.dt(), d, values)?)
}

/// One replica: per perturbation, `(||Y1 - Y2||_{inf,T}, ||Z1 - Z2||_{0;T}, in A_{M,R})`.
type RatioRow = Vec<(f64, f64, bool)>;

/// Empirical `E ||Y1 - Y2||^p 1_A / E ||Z1 - Z2||_{0;T}^p 1_A` for driver shifts `Z2 = Z1 + eps t`.
pub fn estimate_quasi_contractivity(cfg: &ExperimentConfig, workers: usize) -> Result<QuasiReport, ExperimentError> {
    let cfg = cfg.resolved()?;
    let ExperimentKind::QuasiContract(ex) = &cfg.experiment else {
        return Err(ExperimentError::Config(format!(
            "expected a quasi_contract experiment, got {}",
            cfg.experiment.name()
        )));
    };
    let p = ex.p.expect("resolved moment order");
    let solver = solver_config(&cfg, ex.n_steps)?;
    let spec = &cfg.spec;
    let (alpha, r, horizon) = (cfg.holder.alpha, spec.delay, cfg.horizon);
    let eta = constant_initial(&cfg.x0, r, solver.dt(), 0.0)?;
    let source = DriverSource::new(&cfg, ex.n_steps)?;
    let rows: Vec<RatioRow> = map_replicas(workers, cfg.replicas, |i| {
        let d = source.sample(i)?;
        let y1 = euler_mixed_sdde(spec, &eta, &d.w, &d.z, &solver).map_err(at_replica(i, "unperturbed driver"))?;
        let z1_norm = vector_seminorm_0_alpha(&d.z, alpha, Some((0.0, horizon)))?;
        let y1_norm = delay_norms(&y1, alpha, r, horizon)?.norm_t;
        ex.perturbations
            .iter()
            .map(|&eps| {
                let z2 = shifted_driver(&d.z, eps)?;
                let y2 = euler_mixed_sdde(spec, &eta, &d.w, &z2, &solver).map_err(at_replica(i, format!("shift {eps}")))?;
                let diff = sup_distance(&y1, &y2, y1.t0(), horizon)?;
                let dz = shifted_driver(&GridPath::constant(0.0, d.z.dt(), d.z.len(), &vec![0.0; d.z.dim()])?, eps)?;
                let dz_norm = vector_seminorm_0_alpha(&dz, alpha, Some((0.0, horizon)))?;
                let z2_norm = vector_seminorm_0_alpha(&z2, alpha, Some((0.0, horizon)))?;
                let y2_norm = delay_norms(&y2, alpha, r, horizon)?.norm_t;
                let inside = z1_norm <= ex.m_trunc && z2_norm <= ex.m_trunc && y1_norm <= ex.r_trunc && y2_norm <= ex.r_trunc;
                Ok((diff, dz_norm, inside))
            })
            .collect()
    })?;
    let n = cfg.replicas as f64;
    let levels: Vec<RatioLevel> = ex
        .perturbations
        .iter()
        .enumerate()
        .map(|(j, &eps)| {
            let (mut num, mut den, mut count) = (0.0, 0.0, 0);
            for row in &rows {
                let (diff, dz, inside) = row[j];
                if inside {
                    num += diff.powf(p);
                    den += dz.powf(p);
                    count += 1;
                }
            }
            let (numerator, denominator) = (num / n, den / n);
            RatioLevel {
                epsilon: eps,
                numerator,
                denominator,
                ratio: (denominator > 0.0).then(|| numerator / denominator),
                event_count: count,
            }
        })
        .collect();
    let inconclusive = levels.iter().any(|l| l.event_count == 0);
    let ratios: Vec<f64> = levels.iter().filter_map(|l| l.ratio).collect();
    let spread = if !ratios.is_empty() && ratios.iter().all(|&v| v > 0.0) {
        let max = ratios.iter().copied().fold(f64::MIN, f64::max);
        let min = ratios.iter().copied().fold(f64::MAX, f64::min);
        Some(max / min)
    } else {
        None
    };
    let unbounded_growth =
        ratios.len() >= 2 && ratios.windows(2).all(|w| w[1] > w[0]) && ratios[ratios.len() - 1] > 10.0 * ratios[0];
    let mut criteria = Vec::new();
    if let Some(bound) = ex.criteria.max_ratio_spread {
        let ok = !inconclusive && spread.is_some_and(|s| s <= bound);
        criteria.push(CriterionOutcome::new(
            "ratio_spread",
            ok,
            match spread {
                Some(s) => format!("max/min ratio {s}, bound {bound}, ratios {ratios:?}"),
                None => format!("ratio spread undefined (ratios {ratios:?}, inconclusive = {inconclusive})"),
            },
        ));
    }
    Ok(QuasiReport {
        version: super::version_string(),
        kind: cfg.experiment.name().into(),
        seeds: seeds(&cfg, ex.n_steps),
        p,
        levels,
        spread,
        inconclusive,
        unbounded_growth,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{MomentCriteria, Moments, QuasiContract, QuasiCriteria};
    use crate::sdde::{CoefficientSpec, HolderParams};
    use crate::solver::DEFAULT_EXPLOSION_THRESHOLD;

    fn base(spec: CoefficientSpec, experiment: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            master_seed: 5,
            replicas: 40,
            horizon: 1.0,
            holder: HolderParams::new(0.75, 0.7, 0.35, 0.9, 0.45).unwrap(),
            spec,
            x0: vec![1.0],
            fbm_method: None,
            explosion_threshold: DEFAULT_EXPLOSION_THRESHOLD,
            experiment,
        }
    }

    fn moments(spec: CoefficientSpec) -> ExperimentConfig {
        base(
            spec,
            ExperimentKind::Moments(Moments {
                p: vec![1.0, 2.0, 4.0],
                n_steps: 64,
                m_trunc: 10.0,
                criteria: MomentCriteria::default(),
            }),
        )
    }

    #[test]
    fn lognormal_moment_formula() {
        // E X(T)^2 = x0^2 exp((2a + b^2) T + 2 c^2 T^{2H})
        let m = lognormal_moment(0.5, 0.4, 0.3, 1.0, 1.0, 0.75, 2.0);
        assert!((m - (1.0f64 + 0.16 + 0.18).exp()).abs() < 1e-12);
        assert_eq!(lognormal_moment(0.0, 0.0, 0.0, 2.0, 1.0, 0.75, 3.0), 8.0);
    }

    #[test]
    fn zero_coefficients_have_unit_moments() {
        let r = estimate_moments(&moments(CoefficientSpec::geometric(0.0, 0.0, 0.0)), 2).unwrap();
        for e in &r.estimates {
            assert_eq!(e.sup_moment, 1.0);
            assert_eq!(e.terminal_moment, 1.0);
            assert_eq!(e.oracle, Some(1.0));
        }
        assert_eq!(r.survival, vec![(1.0, 0.0)]);
    }

    #[test]
    fn lp_norms_increase_with_p() {
        let r = estimate_moments(&moments(CoefficientSpec::geometric(0.5, 0.4, 0.3)), 4).unwrap();
        let norms: Vec<f64> = r.estimates.iter().map(|e| e.sup_moment.powf(1.0 / e.p)).collect();
        assert!(norms.windows(2).all(|w| w[1] >= w[0]), "{norms:?}");
        assert!(r.estimates.iter().all(|e| e.sup_moment >= e.terminal_moment && e.truncated_moment >= 0.0));
        assert!(r.event_fraction > 0.0);
    }

    fn quasi(spec: CoefficientSpec, perturbations: Vec<f64>) -> ExperimentConfig {
        base(
            spec,
            ExperimentKind::QuasiContract(QuasiContract {
                perturbations,
                p: None,
                n_steps: 64,
                m_trunc: 10.0,
                r_trunc: 1e3,
                criteria: QuasiCriteria {
                    max_ratio_spread: Some(10.0),
                },
            }),
        )
    }

    #[test]
    fn identical_drivers_give_no_ratio() {
        let r = estimate_quasi_contractivity(&quasi(CoefficientSpec::geometric(0.5, 0.4, 0.3), vec![0.0]), 2).unwrap();
        assert_eq!(r.p, 14.0);
        assert_eq!(r.levels[0].numerator, 0.0);
        assert_eq!(r.levels[0].ratio, None);
        assert!(!r.passed);
    }

    #[test]
    fn no_fractional_term_gives_zero_numerator() {
        let r = estimate_quasi_contractivity(&quasi(CoefficientSpec::geometric(0.5, 0.4, 0.0), vec![0.1, 0.05]), 2).unwrap();
        assert!(r.levels.iter().all(|l| l.numerator == 0.0 && l.denominator > 0.0));
    }

    #[test]
    fn ratio_is_bounded_for_linear_equation() {
        let r = estimate_quasi_contractivity(
            &quasi(CoefficientSpec::geometric(0.5, 0.4, 0.3), vec![0.1, 0.05, 0.025]),
            4,
        )
        .unwrap();
        assert!(r.passed, "{:?}", r.criteria);
        assert!(!r.unbounded_growth && !r.inconclusive);
    }
}
