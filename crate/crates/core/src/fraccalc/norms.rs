//! Grid proxies of `||f||_{1,alpha}`, `||g||_{0,alpha}` and the delay norms.

use super::kernel::PowerTable;
use super::{check_alpha, scalar_window, DelayNormBundle, FracError, NormBundle};
use crate::driver::holder_seminorm;
use crate::path::GridPath;

/// `\int_a^b ( |f(a)| (t-a)^{-alpha} + \int_a^t |f(t)-f(s)| (t-s)^{-1-alpha} ds ) dt`.
pub(crate) fn norm_1_alpha_values(f: &[f64], h: f64, alpha: f64) -> f64 {
    let n = f.len() - 1;
    let len = n as f64 * h;
    let head = f[0].abs() * len.powf(1.0 - alpha) / (1.0 - alpha);
    let table = PowerTable::new(1.0 + alpha, h, n);
    let slopes: Vec<f64> = f.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut inner = vec![0.0; n + 1];
    for k in 1..=n {
        let mut acc = 0.0;
        for j in 0..k {
            let q = k - j;
            let a = f[k] - f[j] - (f[j + 1] - f[j]) * q as f64;
            acc += table.cell_abs(q, a, slopes[j], h);
        }
        inner[k] = acc;
    }
    let body: f64 = inner.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
    head + body
}

/// `sup_{s<t} ( |g(t)-g(s)| / (t-s)^{1-alpha} + \int_s^t |g(u)-g(s)| (u-s)^{alpha-2} du )` over node pairs.
pub(crate) fn seminorm_0_alpha_values(g: &[f64], h: f64, alpha: f64) -> f64 {
    let n = g.len() - 1;
    let table = PowerTable::new(2.0 - alpha, h, n);
    let lag_pow: Vec<f64> = (0..=n).map(|q| (q as f64 * h).powf(1.0 - alpha)).collect();
    let slopes: Vec<f64> = g.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut best: f64 = 0.0;
    for i in 0..n {
        let gi = g[i];
        let mut acc = 0.0;
        for j in i..n {
            let q = j - i + 1;
            let a = g[j] - gi - (g[j + 1] - g[j]) * (j - i) as f64;
            acc += table.cell_abs(q, a, slopes[j], h);
            let v = (g[j + 1] - gi).abs() / lag_pow[q] + acc;
            if v > best {
                best = v;
            }
        }
    }
    best
}

pub fn norm_1_alpha(f: &GridPath, alpha: f64, interval: Option<(f64, f64)>) -> Result<f64, FracError> {
    check_alpha(alpha)?;
    let w = scalar_window(f, interval, 2)?;
    Ok(norm_1_alpha_values(w.values(), w.dt(), alpha))
}

pub fn seminorm_0_alpha(g: &GridPath, alpha: f64, interval: Option<(f64, f64)>) -> Result<f64, FracError> {
    check_alpha(alpha)?;
    let w = scalar_window(g, interval, 2)?;
    Ok(seminorm_0_alpha_values(w.values(), w.dt(), alpha))
}

/// Sum of the coordinate seminorms; an upper proxy for the Euclidean version.
pub fn vector_seminorm_0_alpha(g: &GridPath, alpha: f64, interval: Option<(f64, f64)>) -> Result<f64, FracError> {
    (0..g.dim())
        .map(|j| seminorm_0_alpha(&g.coordinate_path(j), alpha, interval))
        .sum()
}

/// All norms of a scalar grid function on `interval` at once.
pub fn fractional_norms(f: &GridPath, alpha: f64, interval: Option<(f64, f64)>, lambda: f64) -> Result<NormBundle, FracError> {
    check_alpha(alpha)?;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(FracError::InvalidExponent { name: "lambda", value: lambda });
    }
    let w = scalar_window(f, interval, 2)?;
    let h = w.dt();
    Ok(NormBundle {
        norm_1_alpha: norm_1_alpha_values(w.values(), h, alpha),
        seminorm_0_alpha: seminorm_0_alpha_values(w.values(), h, alpha),
        sup_norm: w.sup_norm(),
        holder: holder_seminorm(&w, lambda, None).map_err(|_| FracError::TooShort(2))?,
    })
}

/// `||f||_{inf,t}`, `||f||_{1,t}` and `||f||_t` for a path covering `[-r, t]`.
///
/// The lagged supremum `D(l) = sup_{v in [-r, t-l]} |f(v+l) - f(v)|` is taken on
/// grid lags and interpolated linearly between them; on the first lag cell it is
/// exactly `l * max|slope|`, which makes the `l^{-1-alpha}` singularity integrable.
pub fn delay_norms(f: &GridPath, alpha: f64, r: f64, t: f64) -> Result<DelayNormBundle, FracError> {
    check_alpha(alpha)?;
    if !(t > 0.0) {
        return Err(FracError::NonPositiveTime(t));
    }
    let w = f.window(-r, t)?;
    if !w.all_finite() {
        return Err(FracError::NonFinite);
    }
    let h = w.dt();
    let n = w.n_steps();
    let lags = w.index_of(t)? - w.index_of(0.0)?;
    let norm_inf = w.sup_norm();

    let mut lagged = vec![0.0; lags + 1];
    for (j, d) in lagged.iter_mut().enumerate().skip(1) {
        let mut best: f64 = 0.0;
        for k in 0..=n - j {
            best = best.max(w.node_distance(k, k + j));
        }
        *d = best;
    }
    let mut norm_1 = 0.0;
    if lags >= 1 {
        norm_1 += lagged[1] * h.powf(-alpha) / (1.0 - alpha);
        let table = PowerTable::new(1.0 + alpha, h, lags);
        for j in 1..lags {
            let slope = (lagged[j + 1] - lagged[j]) / h;
            let a = lagged[j] - slope * j as f64 * h;
            norm_1 += table.cell(j + 1, a, slope);
        }
    }
    Ok(DelayNormBundle::new(norm_inf, norm_1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, f: impl Fn(f64) -> f64) -> GridPath {
        GridPath::on_interval(0.0, 1.0, n, f).unwrap()
    }

    #[test]
    fn zero_function_has_zero_norms() {
        let z = grid(64, |_| 0.0);
        let b = fractional_norms(&z, 0.3, None, 0.5).unwrap();
        assert_eq!(b, NormBundle { norm_1_alpha: 0.0, seminorm_0_alpha: 0.0, sup_norm: 0.0, holder: 0.0 });
    }

    #[test]
    fn identity_seminorm_is_three() {
        let b = fractional_norms(&grid(256, |t| t), 0.5, None, 0.5).unwrap();
        assert!((b.seminorm_0_alpha - 3.0).abs() < 1e-12, "{}", b.seminorm_0_alpha);
        assert!((b.holder - 1.0).abs() < 1e-12);
        assert!((b.sup_norm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_norm_1_alpha() {
        for &c in &[2.0, -0.5] {
            let v = norm_1_alpha(&grid(128, |_| c), 0.3, None).unwrap();
            assert!((v - c.abs() / 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_norm_1_alpha_closed_form() {
        // f(t) = t on [0,1]: \int_0^1 \int_0^t (t-s)^{-alpha} ds dt = 1 / ((1-alpha)(2-alpha))
        let alpha = 0.4;
        let v = norm_1_alpha(&grid(512, |t| t), alpha, None).unwrap();
        let expect = 1.0 / ((1.0 - alpha) * (2.0 - alpha));
        assert!((v - expect).abs() < 1e-4, "{v} vs {expect}");
    }

    #[test]
    fn delay_norm_examples() {
        let c = GridPath::on_interval(-1.0, 1.0, 200, |_| -2.0).unwrap();
        let b = delay_norms(&c, 0.3, 1.0, 1.0).unwrap();
        assert_eq!(b, DelayNormBundle::new(2.0, 0.0));

        let id = GridPath::on_interval(-1.0, 1.0, 400, |t| t).unwrap();
        let b = delay_norms(&id, 0.25, 1.0, 1.0).unwrap();
        assert!((b.norm_inf_t - 1.0).abs() < 1e-15);
        assert!((b.norm_1_t - 4.0 / 3.0).abs() < 1e-10, "{}", b.norm_1_t);
        assert_eq!(b.norm_t, b.norm_inf_t + b.norm_1_t);
        assert_eq!(delay_norms(&id, 0.25, 1.0, 0.0), Err(FracError::NonPositiveTime(0.0)));
    }

    #[test]
    fn delay_norms_grow_with_time() {
        let f = GridPath::on_interval(-0.5, 1.0, 300, |t| (7.0 * t).sin() * (1.0 + t)).unwrap();
        let mut prev = DelayNormBundle::new(0.0, 0.0);
        for k in 1..=20 {
            let t = k as f64 * 0.05;
            let b = delay_norms(&f, 0.3, 0.5, t).unwrap();
            assert!(b.norm_inf_t >= prev.norm_inf_t && b.norm_1_t >= prev.norm_1_t);
            prev = b;
        }
    }
}
