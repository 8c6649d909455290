//! Generalized Lebesgue–Stieltjes integral, its Riemann–Stieltjes oracle, and
//! the Young–Love bound.

use serde::{Deserialize, Serialize};

use super::derivative::{backward_kernel_sums, forward_kernel_sums};
use super::kernel::weighted_linear;
use super::norms::{norm_1_alpha_values, seminorm_0_alpha_values};
use super::{check_alpha, gamma, scalar_window, FracError};
use crate::driver::holder_seminorm;
use crate::path::GridPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiemannRule {
    Left,
    Midpoint,
}

fn common_grid(f: &GridPath, g: &GridPath, min_nodes: usize) -> Result<(GridPath, GridPath), FracError> {
    let f = scalar_window(f, None, min_nodes)?;
    let g = scalar_window(g, None, min_nodes)?;
    f.check_same_grid(&g).map_err(|_| FracError::GridMismatch)?;
    Ok((f, g))
}

/// `\int_a^b f dg` over the common grid of `f` and `g`, computed as
/// `-\int_a^b (D^alpha_{a+} f)(x) (D^{1-alpha}_{b-} g_{b-})(x) dx` with the real-valued
/// backward derivative of [`super::backward_rl_derivative`].
///
/// The outer integral is split at the middle node. On the left half the
/// `(x-a)^{-alpha}` singularity of the forward derivative is factored out, on the
/// right half the `(b-x)^alpha` decay of the backward derivative, and the
/// remaining smooth factor is integrated as a linear function per cell.
///
/// The product quadrature has a leading error term proportional to
/// `h^{1+alpha}`; when the grid has an even number of steps (at least 8) it is
/// removed by Richardson extrapolation against the dyadic coarsening.
pub fn gls_integral(f: &GridPath, g: &GridPath, alpha: f64) -> Result<f64, FracError> {
    check_alpha(alpha)?;
    let (f, g) = common_grid(f, g, 3)?;
    let fine = gls_product_quadrature(f.values(), g.values(), f.dt(), alpha);
    if f.n_steps() % 2 != 0 || f.n_steps() < 8 {
        return Ok(fine);
    }
    let (fc, gc) = (f.restrict(2)?, g.restrict(2)?);
    let coarse = gls_product_quadrature(fc.values(), gc.values(), fc.dt(), alpha);
    let w = 2f64.powf(1.0 + alpha);
    Ok((w * fine - coarse) / (w - 1.0))
}

fn gls_product_quadrature(fv: &[f64], gv: &[f64], h: f64, alpha: f64) -> f64 {
    let n = fv.len() - 1;

    let fs = forward_kernel_sums(fv, h, alpha);
    let bs = backward_kernel_sums(gv, h, alpha);
    let cf = 1.0 / gamma(1.0 - alpha);
    let cg = 1.0 / gamma(alpha);

    // F(x_k) (x_k - a)^alpha, finite at k = 0
    let weighted_f: Vec<f64> = (0..=n)
        .map(|k| {
            if k == 0 {
                cf * fv[0]
            } else {
                cf * (fv[k] + alpha * (k as f64 * h).powf(alpha) * fs[k])
            }
        })
        .collect();
    let gb = gv[n];
    let back: Vec<f64> = (0..n)
        .map(|k| cg * ((gv[k] - gb) / ((n - k) as f64 * h).powf(1.0 - alpha) + (1.0 - alpha) * bs[k]))
        .collect();

    let mid = n / 2;
    let mut left = 0.0;
    for k in 0..mid {
        let q0 = weighted_f[k] * back[k];
        let q1 = weighted_f[k + 1] * back[k + 1];
        left += weighted_linear(alpha, k as f64 * h, (k + 1) as f64 * h, q0, (q1 - q0) / h);
    }

    // F(x) G(x) / (b - x)^alpha on [x_mid, b]; the value at b is extrapolated.
    let mut right_q: Vec<f64> = (mid..n)
        .map(|k| {
            let fx = weighted_f[k] / (k as f64 * h).powf(alpha);
            fx * back[k] / ((n - k) as f64 * h).powf(alpha)
        })
        .collect();
    let last = right_q.len();
    let at_b = if last >= 2 {
        2.0 * right_q[last - 1] - right_q[last - 2]
    } else {
        right_q[last - 1]
    };
    right_q.push(at_b);
    let mut right = 0.0;
    for (i, k) in (mid..n).enumerate() {
        // cell [x_k, x_{k+1}] in z = b - x runs from z0 = (n-k-1) h to z1 = (n-k) h
        let z0 = (n - k - 1) as f64 * h;
        let z1 = (n - k) as f64 * h;
        let q_at_z0 = right_q[i + 1];
        let q_at_z1 = right_q[i];
        right += weighted_linear(-alpha, z0, z1, q_at_z0, (q_at_z1 - q_at_z0) / h);
    }
    -(left + right)
}

/// Grid norms before and after one dyadic coarsening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormGrowth {
    pub norm_1_alpha_f: f64,
    pub seminorm_0_alpha_g: f64,
    pub coarse_norm_1_alpha_f: f64,
    pub coarse_seminorm_0_alpha_g: f64,
    /// Largest fine/coarse ratio of the two norms.
    pub ratio: f64,
}

/// Compares the norms in the integral estimate on the grid and on its dyadic coarsening.
pub fn gls_norm_growth(f: &GridPath, g: &GridPath, alpha: f64) -> Result<NormGrowth, FracError> {
    check_alpha(alpha)?;
    let (f, g) = common_grid(f, g, 5)?;
    let h = f.dt();
    let n1 = norm_1_alpha_values(f.values(), h, alpha);
    let s1 = seminorm_0_alpha_values(g.values(), h, alpha);
    let (n0, s0) = if f.n_steps() % 2 == 0 {
        let fc = f.restrict(2)?;
        let gc = g.restrict(2)?;
        (
            norm_1_alpha_values(fc.values(), 2.0 * h, alpha),
            seminorm_0_alpha_values(gc.values(), 2.0 * h, alpha),
        )
    } else {
        (n1, s1)
    };
    let ratio_of = |fine: f64, coarse: f64| if coarse > 0.0 { fine / coarse } else if fine > 0.0 { f64::INFINITY } else { 1.0 };
    Ok(NormGrowth {
        norm_1_alpha_f: n1,
        seminorm_0_alpha_g: s1,
        coarse_norm_1_alpha_f: n0,
        coarse_seminorm_0_alpha_g: s0,
        ratio: ratio_of(n1, n0).max(ratio_of(s1, s0)),
    })
}

/// [`gls_integral`] that refuses inputs whose grid norms blow up under refinement.
pub fn gls_integral_checked(f: &GridPath, g: &GridPath, alpha: f64, growth_limit: f64) -> Result<f64, FracError> {
    let growth = gls_norm_growth(f, g, alpha)?;
    if !growth.ratio.is_finite() || growth.ratio > growth_limit || !growth.norm_1_alpha_f.is_finite() {
        return Err(FracError::UnboundedNorm {
            ratio: growth.ratio,
            limit: growth_limit,
        });
    }
    gls_integral(f, g, alpha)
}

/// `\sum_k f(xi_k) (g(t_{k+1}) - g(t_k))` with left-point or midpoint tags.
pub fn riemann_stieltjes_integral(f: &GridPath, g: &GridPath, rule: RiemannRule) -> Result<f64, FracError> {
    let (f, g) = common_grid(f, g, 2)?;
    let (fv, gv) = (f.values(), g.values());
    let sum = (0..fv.len() - 1)
        .map(|k| {
            let tag = match rule {
                RiemannRule::Left => fv[k],
                RiemannRule::Midpoint => 0.5 * (fv[k] + fv[k + 1]),
            };
            tag * (gv[k + 1] - gv[k])
        })
        .sum();
    Ok(sum)
}

/// `C_{lambda,mu} = (1 - 2^{1 - lambda - mu})^{-1}`.
pub fn young_love_constant(lambda: f64, mu: f64) -> f64 {
    1.0 / (1.0 - 2f64.powf(1.0 - lambda - mu))
}

/// Right-hand side of the Young–Love inequality,
/// `C ||g||_mu (||f||_inf + ||f||_lambda (b-a)^lambda) (b-a)^mu`.
pub fn young_love_bound(
    f: &GridPath,
    g: &GridPath,
    lambda: f64,
    mu: f64,
    interval: Option<(f64, f64)>,
) -> Result<f64, FracError> {
    for (name, value) in [("lambda", lambda), ("mu", mu)] {
        if !(value > 0.0 && value <= 1.0) {
            return Err(FracError::InvalidExponent { name, value });
        }
    }
    if lambda + mu <= 1.0 {
        return Err(FracError::ExponentSum(lambda + mu));
    }
    let f = scalar_window(f, interval, 2)?;
    let g = scalar_window(g, interval, 2)?;
    f.check_same_grid(&g).map_err(|_| FracError::GridMismatch)?;
    let len = f.t_end() - f.t0();
    let g_mu = holder_seminorm(&g, mu, None).map_err(|_| FracError::TooShort(2))?;
    let f_lambda = holder_seminorm(&f, lambda, None).map_err(|_| FracError::TooShort(2))?;
    let f_sup = f.sup_norm();
    Ok(young_love_constant(lambda, mu) * g_mu * (f_sup + f_lambda * len.powf(lambda)) * len.powf(mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, f: impl Fn(f64) -> f64) -> GridPath {
        GridPath::on_interval(0.0, 1.0, n, f).unwrap()
    }

    #[test]
    fn constant_integrand_telescopes() {
        let one = grid(1024, |_| 1.0);
        let g = grid(1024, |t| (2.0 * t).sin() + t);
        let v = gls_integral(&one, &g, 0.4).unwrap();
        let expect = g.value(1024) - g.value(0);
        assert!((v - expect).abs() < 1e-6, "{v} vs {expect}");
        let id = grid(256, |t| t);
        assert!((gls_integral(&grid(256, |_| 1.0), &id, 0.3).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn linear_pair_against_quadratic() {
        // \int_0^1 t d(t^2) = 2/3
        let n = 1 << 12;
        let v = gls_integral(&grid(n, |t| t), &grid(n, |t| t * t), 0.3).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn sine_against_identity() {
        let n = 1 << 12;
        let v = gls_integral(&grid(n, f64::sin), &grid(n, |t| t), 0.25).unwrap();
        let expect = 1.0 - 1f64.cos();
        assert!((expect - 0.459_698).abs() < 1e-6);
        assert!((v - expect).abs() < 1e-6, "{v}");
    }

    #[test]
    fn riemann_stieltjes_examples() {
        let f = grid(2, |t| t);
        assert_eq!(riemann_stieltjes_integral(&f, &f, RiemannRule::Left).unwrap(), 0.25);
        let c = grid(10, |_| 3.0);
        let g = grid(10, |t| t.exp());
        let v = riemann_stieltjes_integral(&c, &g, RiemannRule::Midpoint).unwrap();
        assert!((v - 3.0 * (1f64.exp() - 1.0)).abs() < 1e-12);
        for k in 1..12 {
            let n = 1usize << k;
            let id = grid(n, |t| t);
            let err = (riemann_stieltjes_integral(&id, &id, RiemannRule::Left).unwrap() - 0.5).abs();
            assert!(err <= 1.0 / (2.0 * n as f64) + 1e-15);
        }
        let other = GridPath::on_interval(0.0, 2.0, 10, |t| t).unwrap();
        assert_eq!(riemann_stieltjes_integral(&c, &other, RiemannRule::Left), Err(FracError::GridMismatch));
    }

    #[test]
    fn young_love_examples() {
        let zero = grid(64, |_| 0.0);
        let id = grid(64, |t| t);
        assert_eq!(young_love_bound(&zero, &id, 0.6, 0.6, None).unwrap(), 0.0);
        let b = young_love_bound(&id, &id, 1.0, 1.0, None).unwrap();
        assert!((b - 4.0).abs() < 1e-12);
        assert!(b >= 0.5);
        assert_eq!(young_love_bound(&id, &id, 0.5, 0.5, None), Err(FracError::ExponentSum(1.0)));
    }

    #[test]
    fn checked_integral_flags_norm_blow_up() {
        // Alternating sawtooth: the 0-alpha seminorm doubles-ish under each refinement.
        let n = 1024;
        let saw = GridPath::on_interval(0.0, 1.0, n, |_| 0.0)
            .unwrap()
            .values()
            .iter()
            .enumerate()
            .map(|(k, _)| if k % 2 == 0 { 0.0 } else { 1.0 })
            .collect::<Vec<_>>();
        let g = GridPath::scalar(0.0, 1.0 / n as f64, saw).unwrap();
        let f = grid(n, |t| t);
        assert!(matches!(gls_integral_checked(&f, &g, 0.3, 1.5), Err(FracError::UnboundedNorm { .. })));
        let smooth = grid(n, |t| t * t);
        assert!(gls_integral_checked(&f, &smooth, 0.3, 1.5).is_ok());
    }

    #[test]
    fn additive_over_subintervals() {
        let n = 1 << 12;
        let f = GridPath::on_interval(0.0, 2.0, n, |t| (1.5 * t).cos() + 0.3 * t).unwrap();
        let g = GridPath::on_interval(0.0, 2.0, n, |t| (t * t).sin()).unwrap();
        let whole = gls_integral(&f, &g, 0.35).unwrap();
        let left = gls_integral(&f.window(0.0, 0.75).unwrap(), &g.window(0.0, 0.75).unwrap(), 0.35).unwrap();
        let right = gls_integral(&f.window(0.75, 2.0).unwrap(), &g.window(0.75, 2.0).unwrap(), 0.35).unwrap();
        assert!((whole - left - right).abs() < 1e-6, "{}", whole - left - right);
    }

    #[test]
    fn agrees_with_midpoint_riemann_stieltjes() {
        let n = 1 << 12;
        let f = grid(n, |t| (4.0 * t).sin() * t);
        let g = grid(n, |t| (3.0 * t).cos());
        let rs = riemann_stieltjes_integral(&f, &g, RiemannRule::Midpoint).unwrap();
        assert!((gls_integral(&f, &g, 0.45).unwrap() - rs).abs() < 1e-6);
    }

    fn trig(coef: &[(f64, f64)], t: f64) -> f64 {
        coef.iter().enumerate().map(|(k, &(a, b))| {
            let w = (k + 1) as f64;
            a * (w * t).cos() + b * (w * t).sin()
        }).sum()
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn integral_respects_norm_estimate_and_young_love(
            fc in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..4),
            gc in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..4),
            alpha in 0.1f64..0.9,
        ) {
            let n = 256;
            let f = grid(n, |t| trig(&fc, t));
            let g = grid(n, |t| trig(&gc, t));
            let v = gls_integral(&f, &g, alpha).unwrap();
            let nf = norm_1_alpha_values(f.values(), f.dt(), alpha);
            let sg = seminorm_0_alpha_values(g.values(), g.dt(), alpha);
            let bound = nf * sg / (gamma(alpha) * gamma(1.0 - alpha));
            proptest::prop_assert!(v.abs() <= bound * (1.0 + 1e-9) + 1e-12, "{} > {}", v, bound);
            let yl = young_love_bound(&f, &g, 0.9, 0.9, None).unwrap();
            proptest::prop_assert!(v.abs() <= yl);
        }
    }
}
