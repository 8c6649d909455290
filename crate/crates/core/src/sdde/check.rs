//! Randomized falsification of the coefficient assumptions.
//!
//! A pass means no violation was found within the sample budget.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::coeff::{ClaimedConstants, CoefficientSpec, Family, ImpliedConstants};
use super::segment::Segment;
use super::{HolderParams, InitialCondition, SddeError};
use crate::driver::SeedSpec;
use crate::path::{euclid, GRID_ALIGN_TOL};

/// Relative slack for floating-point round-off in the comparisons.
const SLACK: f64 = 1e-9;
const CHANNEL_CHECK: u64 = 0x4348_4b00;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBudget {
    pub samples: usize,
    pub seed: u64,
    /// Nodes per sampled segment (at least 2 when the delay is positive).
    pub nodes: usize,
}

impl Default for SampleBudget {
    fn default() -> Self {
        Self {
            samples: 2000,
            seed: 0,
            nodes: 17,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// The sample that exhibits the largest `lhs / rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub times: Vec<f64>,
    pub psi: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_other: Option<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: Status,
    pub samples: usize,
    /// Whether the closed-form constant respects the claimed one, where one exists.
    pub closed_form_ok: Option<bool>,
    pub worst_ratio: f64,
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub family: Family,
    pub claimed: ClaimedConstants,
    pub implied: ImpliedConstants,
    pub checks: Vec<CheckOutcome>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tracker {
    name: &'static str,
    samples: usize,
    worst: f64,
    witness: Option<Witness>,
    violated: bool,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            samples: 0,
            worst: 0.0,
            witness: None,
            violated: false,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64, witness: impl FnOnce() -> Witness) {
        self.samples += 1;
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let violated = lhs > rhs * (1.0 + SLACK) + f64::MIN_POSITIVE || !lhs.is_finite();
        // the first violation is kept as witness; otherwise the tightest sample
        if (violated && !self.violated) || (!self.violated && ratio > self.worst) || (violated && ratio > self.worst) {
            self.witness = Some(witness());
        }
        self.worst = self.worst.max(ratio);
        self.violated |= violated;
    }

    fn finish(self, closed_form_ok: Option<bool>) -> CheckOutcome {
        CheckOutcome {
            name: self.name.into(),
            status: if self.violated { Status::Fail } else { Status::Pass },
            samples: self.samples,
            closed_form_ok,
            worst_ratio: self.worst,
            witness: self.witness,
            note: None,
        }
    }
}

/// A step that aligns every tap lag, or `r` itself for delay-free specs.
fn sampling_step(spec: &CoefficientSpec, nodes: usize) -> Result<(f64, usize), SddeError> {
    if spec.delay == 0.0 {
        return Ok((1.0, 0));
    }
    let lags: Vec<f64> = spec.maps().flat_map(|m| m.taps.iter().map(|t| t.lag)).collect();
    let mut steps = nodes.max(2) - 1;
    for _ in 0..12 {
        let dt = spec.delay / steps as f64;
        let aligned = lags.iter().all(|l| {
            let p = l / dt;
            (p - p.round()).abs() <= GRID_ALIGN_TOL
        });
        if aligned {
            return Ok((dt, steps));
        }
        steps *= 2;
    }
    Err(SddeError::NotAligned {
        lag: lags[0],
        dt: spec.delay / steps as f64,
    })
}

struct Sampler {
    rng: ChaCha8Rng,
    dim: usize,
    nodes: usize,
}

impl Sampler {
    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Random segment values; mixes Gaussian, constant and spike shapes over many scales.
    fn segment(&mut self) -> Vec<f64> {
        let scale = 10f64.powf(self.rng.random_range(-2.0..4.0));
        let n = self.nodes * self.dim;
        match self.rng.random_range(0..3) {
            0 => (0..n).map(|_| scale * self.normal()).collect(),
            1 => {
                let x: Vec<f64> = (0..self.dim).map(|_| scale * self.normal()).collect();
                (0..n).map(|i| x[i % self.dim]).collect()
            }
            _ => {
                let mut v: Vec<f64> = (0..n).map(|_| 0.01 * scale * self.normal()).collect();
                let k = self.rng.random_range(0..self.nodes);
                for j in 0..self.dim {
                    v[k * self.dim + j] = scale * self.normal();
                }
                v
            }
        }
    }

    /// Segment rescaled to sup norm `radius * U(0, 1]`.
    fn segment_in_ball(&mut self, radius: f64) -> Vec<f64> {
        let v = self.segment();
        let norm = sup_norm(&v, self.dim).max(f64::MIN_POSITIVE);
        let target = radius * self.rng.random_range(f64::EPSILON..=1.0);
        v.iter().map(|x| x * target / norm).collect()
    }

    fn time(&mut self, horizon: f64) -> f64 {
        self.rng.random_range(0.0..=horizon)
    }

    /// Pair of times, half of them close together.
    fn time_pair(&mut self, horizon: f64) -> (f64, f64) {
        let t1 = self.time(horizon);
        let t2 = if self.rng.random_bool(0.5) {
            let gap = horizon * 10f64.powf(self.rng.random_range(-6.0..0.0));
            (t1 + gap).min(horizon)
        } else {
            self.time(horizon)
        };
        (t1, t2)
    }
}

fn sup_norm(v: &[f64], dim: usize) -> f64 {
    v.chunks_exact(dim).map(euclid).fold(0.0, f64::max)
}

fn diff_norm(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Closed-form constants of `spec` plus sampled checks of linear growth,
/// the Fréchet bound on `d_psi c`, local Lipschitz continuity,
/// time-Hölder continuity of `c` and Hölder continuity of `eta`.
/// A final `exponents` entry checks the admissibility of `params` and of the
/// claimed `beta`, `theta`.
pub fn check_assumptions(
    spec: &CoefficientSpec,
    params: &HolderParams,
    eta: Option<&InitialCondition>,
    horizon: f64,
    budget: SampleBudget,
) -> Result<AssumptionReport, SddeError> {
    spec.validate()?;
    if !(horizon > 0.0) {
        return Err(SddeError::Family(format!("horizon must be positive, got {horizon}")));
    }
    let claimed = spec.constants;
    let implied = spec.implied_constants(claimed.beta);
    let (dt, steps) = sampling_step(spec, budget.nodes)?;
    let d = spec.dim;
    let (m, l) = (spec.n_wiener(), spec.n_fractional());
    let mut sampler = Sampler {
        rng: SeedSpec::new(budget.seed, 0).rng(CHANNEL_CHECK),
        dim: d,
        nodes: steps + 1,
    };
    fn view(v: &[f64], d: usize, dt: f64) -> Segment<'_> {
        Segment::from_slice(v, d, dt, 0.0).expect("sampled segment is valid")
    }
    let (mut a, mut b, mut c) = (vec![0.0; d], vec![0.0; d * m], vec![0.0; d * l]);
    let (mut a2, mut b2, mut c2) = (vec![0.0; d], vec![0.0; d * m], vec![0.0; d * l]);
    let zero = vec![0.0; (steps + 1) * d];

    let mut h1 = Tracker::new("linear_growth");
    let mut h2 = Tracker::new("frechet_bound");
    let mut h3 = Tracker::new("local_lipschitz");
    let mut h4 = Tracker::new("time_holder");
    for _ in 0..budget.samples {
        // linear growth
        let psi = sampler.segment();
        let t = sampler.time(horizon);
        let s = view(&psi, d, dt);
        spec.drift_into(t, &s, &mut a);
        spec.diffusion_into(t, &s, &mut b);
        spec.fractional_into(t, &s, &mut c);
        let lhs = euclid(&a) + euclid(&b) + euclid(&c);
        let rhs = claimed.k * (1.0 + s.sup_norm());
        h1.record(lhs, rhs, || Witness {
            times: vec![t],
            psi: psi.clone(),
            psi_other: None,
            lhs,
            rhs,
        });

        // Fréchet bound: directional difference quotient of c along a unit direction
        let dir = sampler.segment();
        let dir_norm = sup_norm(&dir, d).max(f64::MIN_POSITIVE);
        let eps = 1e-6 * (1.0 + s.sup_norm());
        let moved: Vec<f64> = psi.iter().zip(&dir).map(|(x, v)| x + eps * v / dir_norm).collect();
        spec.fractional_into(t, &view(&moved, d, dt), &mut c2);
        let quotient = diff_norm(&c, &c2) / eps;
        let rhs2 = claimed.k * (1.0 + 1e-6) + 1e-8 * (1.0 + claimed.k);
        h2.record(quotient, rhs2, || Witness {
            times: vec![t],
            psi: psi.clone(),
            psi_other: Some(moved.clone()),
            lhs: quotient,
            rhs: rhs2,
        });

        // local Lipschitz: pairs inside the ball of radius R
        let p1 = sampler.segment_in_ball(claimed.radius);
        let p2 = sampler.segment_in_ball(claimed.radius);
        let (s1, s2) = (view(&p1, d, dt), view(&p2, d, dt));
        spec.drift_into(t, &s1, &mut a);
        spec.diffusion_into(t, &s1, &mut b);
        spec.drift_into(t, &s2, &mut a2);
        spec.diffusion_into(t, &s2, &mut b2);
        let lhs3 = diff_norm(&a, &a2) + diff_norm(&b, &b2);
        let gap: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| x - y).collect();
        let rhs3 = claimed.k_r * sup_norm(&gap, d);
        h3.record(lhs3, rhs3, || Witness {
            times: vec![t],
            psi: p1.clone(),
            psi_other: Some(p2.clone()),
            lhs: lhs3,
            rhs: rhs3,
        });

        // time-Hölder: c and its derivative along a unit direction, at two times
        let (t1, t2) = sampler.time_pair(horizon);
        let dt_pow = (t1 - t2).abs().powf(claimed.beta);
        spec.fractional_into(t1, &s, &mut c);
        spec.fractional_into(t2, &s, &mut c2);
        let lhs4 = diff_norm(&c, &c2);
        let rhs4 = claimed.k * dt_pow * (1.0 + s.sup_norm());
        h4.record(lhs4, rhs4, || Witness {
            times: vec![t1, t2],
            psi: psi.clone(),
            psi_other: None,
            lhs: lhs4,
            rhs: rhs4,
        });
        let unit: Vec<f64> = dir.iter().map(|v| v / dir_norm).collect();
        let su = view(&unit, d, dt);
        let sz = view(&zero, d, dt);
        spec.fractional_into(t1, &su, &mut c);
        spec.fractional_into(t1, &sz, &mut c2);
        let d1: Vec<f64> = c.iter().zip(&c2).map(|(x, y)| x - y).collect();
        spec.fractional_into(t2, &su, &mut c);
        spec.fractional_into(t2, &sz, &mut c2);
        let d2: Vec<f64> = c.iter().zip(&c2).map(|(x, y)| x - y).collect();
        let lhs4d = diff_norm(&d1, &d2);
        let rhs4d = claimed.k * dt_pow;
        h4.record(lhs4d, rhs4d, || Witness {
            times: vec![t1, t2],
            psi: unit.clone(),
            psi_other: None,
            lhs: lhs4d,
            rhs: rhs4d,
        });
    }

    let mut checks = vec![
        h1.finish(Some(implied.growth <= claimed.k * (1.0 + SLACK))),
        h2.finish(Some(implied.frechet <= claimed.k * (1.0 + SLACK))),
        h3.finish(Some(implied.lipschitz <= claimed.k_r * (1.0 + SLACK))),
        h4.finish(Some(implied.time_holder <= claimed.k * (1.0 + SLACK))),
    ];

    let h5 = match eta {
        Some(ic) => {
            let mut tr = Tracker::new("initial_holder");
            let eta_theta = InitialCondition::new(ic.path().clone(), claimed.theta)?;
            let lhs = eta_theta.holder_constant();
            tr.record(lhs, claimed.k, || Witness {
                times: vec![],
                psi: ic.path().values().to_vec(),
                psi_other: None,
                lhs,
                rhs: claimed.k,
            });
            tr.finish(None)
        }
        None => CheckOutcome {
            name: "initial_holder".into(),
            status: Status::Skipped,
            samples: 0,
            closed_form_ok: None,
            worst_ratio: 0.0,
            witness: None,
            note: Some("no initial condition supplied".into()),
        },
    };
    checks.push(h5);

    let lo = 1.0 - params.gamma;
    let exponent_error = params.validate().err().map(|e| e.to_string()).or_else(|| {
        if !(claimed.beta > lo && claimed.beta < 1.0) {
            Some(format!("claimed beta must lie in ({}, 1)", super::show(lo)))
        } else if !(claimed.theta > lo && claimed.theta < 0.5) {
            Some(format!("claimed theta must lie in ({}, 0.5)", super::show(lo)))
        } else {
            None
        }
    });
    checks.push(CheckOutcome {
        name: "exponents".into(),
        status: if exponent_error.is_some() { Status::Fail } else { Status::Pass },
        samples: 0,
        closed_form_ok: None,
        worst_ratio: 0.0,
        witness: None,
        note: exponent_error,
    });

    Ok(AssumptionReport {
        family: spec.family,
        claimed,
        implied,
        checks,
    })
}
