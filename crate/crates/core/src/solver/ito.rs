//! Euler–Maruyama for Itô delay equations with random, adapted coefficients
//! `dY = f(t, Y_t, omega) dt + sum_i g_i(t, Y_t, omega) dW_i`.

use super::mollifier::{clamp_norm, MollifierParams};
use super::{driver_on_grid, guard, History, SolverConfig, SolverError};
use crate::path::{GridPath, GRID_ALIGN_TOL};
use crate::sdde::{CoefficientSpec, InitialCondition, Segment};

/// Read access to a random context path (e.g. the driver `Z`) that refuses to look ahead.
#[derive(Debug, Clone, Copy)]
pub struct AdaptedView<'a> {
    context: Option<&'a GridPath>,
    now: f64,
}

impl<'a> AdaptedView<'a> {
    pub fn new(context: Option<&'a GridPath>, now: f64) -> Self {
        Self { context, now }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Context value at `s <= now`, linearly interpolated between nodes.
    pub fn read(&self, s: f64, out: &mut [f64]) -> Result<(), SolverError> {
        let path = self
            .context
            .ok_or_else(|| SolverError::Config("evaluator needs a context path but none was supplied".into()))?;
        if s > self.now + GRID_ALIGN_TOL * path.dt() {
            return Err(SolverError::Adaptedness {
                requested: s,
                now: self.now,
            });
        }
        path.interpolate(s, out)?;
        Ok(())
    }
}

/// A coefficient `(t, psi, omega) -> R^{d x columns}` (column-major) whose
/// randomness is read through an [`AdaptedView`].
pub trait RandomCoefficient: Sync {
    fn columns(&self) -> usize;

    fn eval(&self, t: f64, psi: &Segment<'_>, view: &AdaptedView<'_>, out: &mut [f64]) -> Result<(), SolverError>;
}

/// The deterministic drift `a` of a spec.
#[derive(Debug, Clone, Copy)]
pub struct SpecDrift<'a>(pub &'a CoefficientSpec);

impl RandomCoefficient for SpecDrift<'_> {
    fn columns(&self) -> usize {
        1
    }

    fn eval(&self, t: f64, psi: &Segment<'_>, _: &AdaptedView<'_>, out: &mut [f64]) -> Result<(), SolverError> {
        self.0.drift_into(t, psi, out);
        Ok(())
    }
}

/// The deterministic diffusion `b` of a spec.
#[derive(Debug, Clone, Copy)]
pub struct SpecDiffusion<'a>(pub &'a CoefficientSpec);

impl RandomCoefficient for SpecDiffusion<'_> {
    fn columns(&self) -> usize {
        self.0.n_wiener()
    }

    fn eval(&self, t: f64, psi: &Segment<'_>, _: &AdaptedView<'_>, out: &mut [f64]) -> Result<(), SolverError> {
        self.0.diffusion_into(t, psi, out);
        Ok(())
    }
}

/// `f(t, psi) = a(t, psi) + sum_j c_j(t, psi) dZ^N_j/dt (t)`, with `Z` read from the context.
#[derive(Debug, Clone, Copy)]
pub struct MollifiedDrift<'a> {
    pub spec: &'a CoefficientSpec,
    pub params: MollifierParams,
}

impl RandomCoefficient for MollifiedDrift<'_> {
    fn columns(&self) -> usize {
        1
    }

    fn eval(&self, t: f64, psi: &Segment<'_>, view: &AdaptedView<'_>, out: &mut [f64]) -> Result<(), SolverError> {
        let spec = self.spec;
        let (d, l) = (spec.dim, spec.n_fractional());
        spec.drift_into(t, psi, out);
        if l == 0 {
            return Ok(());
        }
        let level = self.params.level as f64;
        let mut now = vec![0.0; l];
        let mut lagged = vec![0.0; l];
        view.read(t, &mut now)?;
        view.read((t - self.params.window()).max(0.0), &mut lagged)?;
        clamp_norm(&mut now, level);
        clamp_norm(&mut lagged, level);
        let mut c = vec![0.0; d * l];
        spec.fractional_into(t, psi, &mut c);
        for j in 0..l {
            let rate = level * (now[j] - lagged[j]);
            for (o, cx) in out.iter_mut().zip(&c[j * d..(j + 1) * d]) {
                *o += cx * rate;
            }
        }
        Ok(())
    }
}

/// Euler–Maruyama on `[-r, T]` with left-point evaluation:
/// `Y(t_{k+1}) = Y(t_k) + f delta + sum_i g_i dW_i`. The evaluators see
/// `context` only up to the current time.
pub fn euler_ito_sdde(
    drift: &dyn RandomCoefficient,
    diffusion: &dyn RandomCoefficient,
    theta: &InitialCondition,
    delay: f64,
    w: &GridPath,
    context: Option<&GridPath>,
    cfg: &SolverConfig,
) -> Result<GridPath, SolverError> {
    cfg.validate()?;
    if drift.columns() != 1 {
        return Err(SolverError::Dimension {
            what: "drift columns",
            expected: 1,
            got: drift.columns(),
        });
    }
    let d = theta.dim();
    let m = diffusion.columns();
    let w = driver_on_grid(w, cfg, m.max(1), "Wiener driver")?;
    let mut hist = History::new(delay, d, theta, cfg)?;
    let dt = cfg.dt();
    let (mut f, mut g) = (vec![0.0; d], vec![0.0; d * m]);
    let mut incr = vec![0.0; d];
    for k in 0..cfg.n_steps {
        let t = cfg.time(k);
        let view = AdaptedView::new(context, t);
        let (seg, next) = hist.split(k);
        drift.eval(t, &seg, &view, &mut f)?;
        diffusion.eval(t, &seg, &view, &mut g)?;
        for (x, fx) in incr.iter_mut().zip(&f) {
            *x = fx * dt;
        }
        let (w0, w1) = (w.node(k), w.node(k + 1));
        for i in 0..m {
            let dw = w1[i] - w0[i];
            for (x, gx) in incr.iter_mut().zip(&g[i * d..(i + 1) * d]) {
                *x += gx * dw;
            }
        }
        for ((n, x), dx) in next.iter_mut().zip(seg.current()).zip(&incr) {
            *n = x + dx;
        }
        guard(next, cfg.time(k + 1), cfg.explosion_threshold)?;
    }
    hist.into_path()
}
