//! Exact integrals of piecewise-linear functions against power kernels.
//!
//! Grid functions are read as their piecewise-linear interpolants. On a cell
//! `[v0, v1]` measured as distance from the kernel's singular point, the
//! integrand is `(A + m v) v^{-p}` with `1 < p < 2`, which integrates in closed
//! form. On the cell touching the singularity `A = 0`, so the result is finite.

/// Powers `(q h)^{1-p}` and `(q h)^{2-p}` for lag indices `q = 0..=n`.
#[derive(Debug, Clone)]
pub struct PowerTable {
    p: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PowerTable {
    pub fn new(p: f64, h: f64, n: usize) -> Self {
        let lo = (0..=n).map(|q| (q as f64 * h).powf(1.0 - p)).collect();
        let hi = (0..=n).map(|q| (q as f64 * h).powf(2.0 - p)).collect();
        Self { p, lo, hi }
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    /// `\int_{(q-1)h}^{qh} (A + m v) v^{-p} dv` for `q >= 1`; `A` is ignored when `q == 1`.
    #[inline]
    pub fn cell(&self, q: usize, a: f64, m: f64) -> f64 {
        let lin = m * (self.hi[q] - self.hi[q - 1]) / (2.0 - self.p);
        if q == 1 {
            lin
        } else {
            a * (self.lo[q] - self.lo[q - 1]) / (1.0 - self.p) + lin
        }
    }

    /// Same cell with `|A + m v|` in place of `A + m v`.
    #[inline]
    pub fn cell_abs(&self, q: usize, a: f64, m: f64, h: f64) -> f64 {
        if q == 1 {
            return self.cell(1, 0.0, m).abs();
        }
        let v0 = (q - 1) as f64 * h;
        let v1 = q as f64 * h;
        let phi0 = a + m * v0;
        let phi1 = a + m * v1;
        if phi0 * phi1 >= 0.0 {
            return self.cell(q, a, m).abs();
        }
        let root = -a / m;
        let left = signed(a, m, v0, root, self.p);
        let right = signed(a, m, root, v1, self.p);
        left.abs() + right.abs()
    }
}

/// `\int_{v0}^{v1} (A + m v) v^{-p} dv` for `0 < v0 <= v1`.
#[inline]
pub fn signed(a: f64, m: f64, v0: f64, v1: f64, p: f64) -> f64 {
    a * (v1.powf(1.0 - p) - v0.powf(1.0 - p)) / (1.0 - p) + m * (v1.powf(2.0 - p) - v0.powf(2.0 - p)) / (2.0 - p)
}

/// `\int_{y0}^{y1} y^{-w} (c0 + c1 (y - y0)) dy` for `w < 1`, `0 <= y0 < y1`.
#[inline]
pub fn weighted_linear(w: f64, y0: f64, y1: f64, c0: f64, c1: f64) -> f64 {
    let e1 = 1.0 - w;
    let e2 = 2.0 - w;
    let m0 = (y1.powf(e1) - y0.powf(e1)) / e1;
    let m1 = (y1.powf(e2) - y0.powf(e2)) / e2;
    (c0 - c1 * y0) * m0 + c1 * m1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(a: f64, m: f64, v0: f64, v1: f64, p: f64, abs: bool) -> f64 {
        let n = 200_000;
        let h = (v1 - v0) / n as f64;
        (0..n)
            .map(|i| {
                let v = v0 + (i as f64 + 0.5) * h;
                let phi = a + m * v;
                (if abs { phi.abs() } else { phi }) * v.powf(-p) * h
            })
            .sum()
    }

    #[test]
    fn cell_matches_midpoint_oracle() {
        let h = 0.1;
        let t = PowerTable::new(1.3, h, 10);
        for &(q, a, m) in &[(2usize, 0.7, -1.2), (5, -0.3, 0.4), (9, 1.0, 0.0)] {
            let v0 = (q - 1) as f64 * h;
            let v1 = q as f64 * h;
            assert!((t.cell(q, a, m) - brute(a, m, v0, v1, 1.3, false)).abs() < 1e-6);
            assert!((t.cell_abs(q, a, m, h) - brute(a, m, v0, v1, 1.3, true)).abs() < 1e-6);
        }
    }

    #[test]
    fn abs_cell_splits_at_sign_change() {
        let h = 0.1;
        let t = PowerTable::new(1.6, h, 4);
        // A + m v vanishes at v = 0.25, inside the third cell.
        let (a, m) = (0.5, -2.0);
        let exact = brute(a, m, 0.2, 0.3, 1.6, true);
        assert!((t.cell_abs(3, a, m, h) - exact).abs() < 1e-6);
        assert!(t.cell(3, a, m).abs() < exact);
    }

    #[test]
    fn first_cell_is_integrable() {
        let h = 0.01;
        let t = PowerTable::new(1.5, h, 1);
        // \int_0^h v^{-1/2} dv = 2 sqrt(h)
        assert!((t.cell(1, 123.0, 1.0) - 2.0 * h.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn weighted_linear_exact_for_polynomials() {
        // \int_0^1 y^{-1/2} (1 + y) dy = 2 + 2/3
        assert!((weighted_linear(0.5, 0.0, 1.0, 1.0, 1.0) - (2.0 + 2.0 / 3.0)).abs() < 1e-14);
        // \int_1^2 y^{-w} dy with w = -0.5 (i.e. y^{1/2})
        let v = weighted_linear(-0.5, 1.0, 2.0, 1.0, 0.0);
        assert!((v - (2f64.powf(1.5) - 1.0) / 1.5).abs() < 1e-14);
    }
}
