//! Monte Carlo summaries: exceedance probabilities with Wilson intervals,
//! moments with standard errors, and trend checks across levels.

use serde::{Deserialize, Serialize};

use super::ExperimentError;

/// Smallest sample accepted by [`estimate_exceedance`].
pub const MIN_SAMPLES: usize = 30;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Estimate of `P(distance > epsilon)` with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub epsilon: f64,
    pub exceed: usize,
    pub samples: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for `successes` out of `n`; contains `successes / n`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Fraction of `distances` strictly above `epsilon`.
pub fn estimate_exceedance(distances: &[f64], epsilon: f64) -> Result<Exceedance, ExperimentError> {
    if distances.len() < MIN_SAMPLES {
        return Err(ExperimentError::TooFewSamples {
            got: distances.len(),
            min: MIN_SAMPLES,
        });
    }
    if !(epsilon > 0.0) {
        return Err(ExperimentError::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let exceed = distances.iter().filter(|&&d| !(d <= epsilon)).count();
    let n = distances.len();
    let (lower, upper) = wilson_interval(exceed, n, Z_95);
    Ok(Exceedance {
        epsilon,
        exceed,
        samples: n,
        estimate: exceed as f64 / n as f64,
        lower,
        upper,
    })
}

/// Summation in slice order, so results do not depend on how samples were produced.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard error of the sample mean (unbiased variance).
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::INFINITY;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`; `None` if any value is non-positive.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Some(sxy / sxx)
}

/// First consecutive pair where the estimate rises and the intervals are disjoint.
pub fn first_disjoint_increase(levels: &[Exceedance]) -> Option<usize> {
    levels
        .windows(2)
        .position(|w| w[1].estimate > w[0].estimate && w[1].lower > w[0].upper)
}

/// Number of consecutive pairs with `next <= previous`.
pub fn non_increasing_steps(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] <= w[0]).count()
}

/// Share of `sum x` carried by the largest `fraction` of the sample (at least one value).
pub fn top_share(xs: &[f64], fraction: f64) -> f64 {
    let total: f64 = xs.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let k = ((xs.len() as f64 * fraction).ceil() as usize).max(1);
    v[..k].iter().sum::<f64>() / total
}

/// Empirical survival function `P(X > x)` at `points` evenly spaced order statistics.
pub fn survival_curve(xs: &[f64], points: usize) -> Vec<(f64, f64)> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 || points == 0 {
        return Vec::new();
    }
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points);
    for i in 0..points {
        let k = if points == 1 { n - 1 } else { i * (n - 1) / (points - 1) };
        let x = v[k];
        if out.last().is_some_and(|&(prev, _)| prev == x) {
            continue;
        }
        let above = n - v.partition_point(|&y| y <= x);
        out.push((x, above as f64 / n as f64));
    }
    out
}
