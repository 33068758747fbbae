//! Chebyshev interpolation on an interval.

use std::f64::consts::PI;

/// Polynomial interpolant in Chebyshev form, evaluated by Clenshaw recurrence.
#[derive(Debug, Clone)]
pub struct Chebyshev {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Interpolates at the `degree + 1` Chebyshev–Lobatto points of `[lo, hi]`.
    pub fn interpolate<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, degree: usize) -> Self {
        let n = degree.max(1);
        let values: Vec<f64> = (0..=n)
            .map(|j| {
                let t = (PI * j as f64 / n as f64).cos();
                f(0.5 * (hi + lo) + 0.5 * (hi - lo) * t)
            })
            .collect();
        // Discrete cosine transform of the Lobatto samples.
        let mut coeffs = vec![0.0; n + 1];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut sum = 0.0;
            for (j, v) in values.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                sum += w * v * (PI * (j * k) as f64 / n as f64).cos();
            }
            let scale = if k == 0 || k == n { 1.0 } else { 2.0 };
            *c = scale * sum / n as f64;
        }
        Self { lo, hi, coeffs }
    }

    /// Doubles the degree (starting at 16, up to `max_degree`) until the tail
    /// coefficients fall below `tol` relative to the largest one.
    pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64, max_degree: usize) -> Self {
        let mut degree = 16;
        loop {
            let cheb = Self::interpolate(&mut f, lo, hi, degree);
            if degree >= max_degree || cheb.tail() <= tol {
                return cheb;
            }
            degree *= 2;
        }
    }

    fn tail(&self) -> f64 {
        let scale = self
            .coeffs
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.abs()))
            .max(f64::MIN_POSITIVE);
        let n = self.coeffs.len();
        self.coeffs[n.saturating_sub(3)..]
            .iter()
            .map(|c| c.abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coeffs[0]
    }
}
