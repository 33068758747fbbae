//! Tridiagonal systems, factored once and solved many times.

/// LU factorization of a tridiagonal matrix without pivoting (Thomas algorithm).
/// Valid for the diagonally dominant matrices produced by implicit diffusion.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    // Modified diagonal and upper band after elimination.
    pivot: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    /// `lower[i]` couples row `i+1` to column `i`; `upper[i]` couples row `i`
    /// to column `i+1`. Returns `None` on a zero pivot.
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Option<Self> {
        let n = diag.len();
        assert!(n >= 1 && lower.len() + 1 == n && upper.len() + 1 == n);
        let mut pivot = Vec::with_capacity(n);
        pivot.push(diag[0]);
        for i in 1..n {
            let prev = pivot[i - 1];
            if prev == 0.0 {
                return None;
            }
            pivot.push(diag[i] - lower[i - 1] * upper[i - 1] / prev);
        }
        if pivot[n - 1] == 0.0 {
            return None;
        }
        Some(Self {
            lower: lower.to_vec(),
            pivot,
            upper: upper.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivot.is_empty()
    }

    /// Solves in place: `rhs` is overwritten by the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        for i in 1..n {
            rhs[i] -= self.lower[i - 1] / self.pivot[i - 1] * rhs[i - 1];
        }
        rhs[n - 1] /= self.pivot[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.pivot[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn solves_against_dense_product() {
        let lower = [-1.0, -0.5, -2.0, 0.3];
        let diag = [4.0, 5.0, 6.0, 7.0, 3.0];
        let upper = [1.0, -1.0, 0.5, 1.5];
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b = [0.0; 5];
        for i in 0..5 {
            b[i] = diag[i] * x[i];
            if i > 0 {
                b[i] += lower[i - 1] * x[i - 1];
            }
            if i < 4 {
                b[i] += upper[i] * x[i + 1];
            }
        }
        let lu = Tridiagonal::factor(&lower, &diag, &upper).unwrap();
        lu.solve_in_place(&mut b);
        for i in 0..5 {
            assert_abs_diff_eq!(b[i], x[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        assert!(Tridiagonal::factor(&[1.0], &[0.0, 1.0], &[1.0]).is_none());
    }
}
