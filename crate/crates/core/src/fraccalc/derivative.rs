//! Forward and backward Riemann–Liouville derivatives.

use super::kernel::PowerTable;
use super::{check_alpha, gamma, scalar_window, FracError};
use crate::path::GridPath;

/// Entry `k` holds `\int_{x_0}^{x_k} (f_k - f(u)) (x_k - u)^{-1-alpha} du`; entry 0 is zero.
pub(crate) fn forward_kernel_sums(f: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    let n = f.len() - 1;
    let table = PowerTable::new(1.0 + alpha, h, n);
    let slopes: Vec<f64> = f.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        let fk = f[k];
        let mut acc = 0.0;
        // cell j covers [x_j, x_{j+1}], lag q = k - j
        for j in (0..k).rev() {
            let q = k - j;
            let jump = f[j + 1] - f[j];
            let a = fk - f[j] - jump * q as f64;
            acc += table.cell(q, a, slopes[j]);
        }
        out[k] = acc;
    }
    out
}

/// Entry `k` holds `\int_{x_k}^{b} (g_k - g(u)) (u - x_k)^{alpha-2} du`; the last entry is zero.
pub(crate) fn backward_kernel_sums(g: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    let n = g.len() - 1;
    let table = PowerTable::new(2.0 - alpha, h, n);
    let slopes: Vec<f64> = g.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut out = vec![0.0; n + 1];
    for k in 0..n {
        let gk = g[k];
        let mut acc = 0.0;
        for j in k..n {
            let q = j - k + 1;
            let jump = g[j + 1] - g[j];
            let a = gk - g[j] + jump * (j - k) as f64;
            acc += table.cell(q, a, -slopes[j]);
        }
        out[k] = acc;
    }
    out
}

/// `D^alpha_{a+} f` at the nodes of `(a, b]`.
///
/// `interval` selects a window of the path (default: the whole path, `a` its first node).
pub fn forward_rl_derivative(f: &GridPath, alpha: f64, interval: Option<(f64, f64)>) -> Result<GridPath, FracError> {
    check_alpha(alpha)?;
    let w = scalar_window(f, interval, 2)?;
    let h = w.dt();
    let vals = w.values();
    let sums = forward_kernel_sums(vals, h, alpha);
    let norm = 1.0 / gamma(1.0 - alpha);
    let out: Vec<f64> = (1..vals.len())
        .map(|k| norm * (vals[k] / (k as f64 * h).powf(alpha) + alpha * sums[k]))
        .collect();
    Ok(GridPath::scalar(w.t0() + h, h, out)?)
}

/// `D^alpha_{a+} f (x)` at a single node `x` with `a` the start of `interval`.
pub fn forward_rl_derivative_at(f: &GridPath, alpha: f64, a: f64, x: f64) -> Result<f64, FracError> {
    check_alpha(alpha)?;
    if (x - a).abs() <= crate::path::GRID_ALIGN_TOL * f.dt() {
        return Err(FracError::SingularPoint(x));
    }
    let w = scalar_window(f, Some((a, x)), 2)?;
    let d = forward_rl_derivative(&w, alpha, None)?;
    Ok(d.value(d.len() - 1))
}

/// Real-valued `D^{1-alpha}_{b-} g_{b-}` at the nodes of `[a, b)`, with
/// `g_{b-}(x) = g(x) - g(b)`.
///
/// The complex phase of the textbook definition is not applied; see
/// [`super::gls_integral`] for how the sign is recovered.
pub fn backward_rl_derivative(g: &GridPath, alpha: f64, interval: Option<(f64, f64)>) -> Result<GridPath, FracError> {
    check_alpha(alpha)?;
    let w = scalar_window(g, interval, 2)?;
    let h = w.dt();
    let vals = w.values();
    let n = vals.len() - 1;
    let sums = backward_kernel_sums(vals, h, alpha);
    let norm = 1.0 / gamma(alpha);
    let gb = vals[n];
    let out: Vec<f64> = (0..n)
        .map(|k| {
            let dist = (n - k) as f64 * h;
            norm * ((vals[k] - gb) / dist.powf(1.0 - alpha) + (1.0 - alpha) * sums[k])
        })
        .collect();
    Ok(GridPath::scalar(w.t0(), h, out)?)
}

/// Backward derivative at a single node `x` of `[x, b]`.
pub fn backward_rl_derivative_at(g: &GridPath, alpha: f64, b: f64, x: f64) -> Result<f64, FracError> {
    check_alpha(alpha)?;
    if (b - x).abs() <= crate::path::GRID_ALIGN_TOL * g.dt() {
        return Err(FracError::SingularPoint(x));
    }
    let w = scalar_window(g, Some((x, b)), 2)?;
    Ok(backward_rl_derivative(&w, alpha, None)?.value(0))
}
