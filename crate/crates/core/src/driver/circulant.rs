//! Davies–Harte circulant embedding for stationary Gaussian increments.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{fgn_autocovariance, standard_normals, DriverError};

#[derive(Clone)]
pub struct CirculantEmbedding {
    n: usize,
    /// `sqrt(lambda_k / (2n))` for the `2n` eigenvalues of the embedding.
    weights: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantEmbedding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantEmbedding").field("n", &self.n).finish()
    }
}

impl CirculantEmbedding {
    /// Embedding of the autocovariance sequence `acov[0..=n]` into a circulant of size `2n`.
    pub fn new(acov: &[f64]) -> Result<Self, DriverError> {
        if acov.len() < 2 {
            return Err(DriverError::InvalidParam("need at least two autocovariances".into()));
        }
        let n = acov.len() - 1;
        let m = 2 * n;
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= n { j } else { m - j };
                Complex::new(acov[lag], 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);

        let scale = row.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        let mut weights = Vec::with_capacity(m);
        for (k, c) in row.iter().enumerate() {
            let mut lambda = c.re;
            if lambda < 0.0 {
                if lambda < -1e-10 * scale {
                    return Err(DriverError::NegativeEigenvalue { index: k, value: lambda });
                }
                lambda = 0.0;
            }
            weights.push((lambda / m as f64).sqrt());
        }
        Ok(Self { n, weights, fft })
    }

    pub fn fgn(n: usize, hurst: f64) -> Result<Self, DriverError> {
        let acov: Vec<f64> = (0..=n).map(|k| fgn_autocovariance(k, hurst)).collect();
        Self::new(&acov)
    }

    /// `n` correlated Gaussian increments.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.n;
        let m = 2 * n;
        let z = standard_normals(rng, m);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let mut w = vec![Complex::new(0.0, 0.0); m];
        w[0] = Complex::new(self.weights[0] * z[0], 0.0);
        w[n] = Complex::new(self.weights[n] * z[n], 0.0);
        for k in 1..n {
            let c = Complex::new(z[k], z[n + k]) * (self.weights[k] * half);
            w[k] = c;
            w[m - k] = c.conj();
        }
        self.fft.process(&mut w);
        w.iter().take(n).map(|c| c.re).collect()
    }
}
