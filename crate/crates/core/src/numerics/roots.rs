//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Bisection on a sign-changing bracket. Stops when the bracket is narrower
/// than `x_tol` or can no longer be split in floating point.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, x_tol: f64) -> Result<f64> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket { lo: a, hi: b });
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= x_tol || m <= a || m >= b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Bisection to `x_tol`, then a single Newton step that is kept only when it
/// stays inside the final bracket and lowers the residual.
pub fn bisect_polish<F, D>(mut f: F, df: D, lo: f64, hi: f64, x_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let x = bisect(&mut f, lo, hi, x_tol)?;
    let fx = f(x);
    let slope = df(x);
    if fx == 0.0 || slope == 0.0 || !slope.is_finite() {
        return Ok(x);
    }
    let candidate = x - fx / slope;
    let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let inside = (candidate - x).abs() <= x_tol.max(f64::EPSILON * x.abs()) && candidate >= a && candidate <= b;
    if inside && f(candidate).abs() < fx.abs() {
        Ok(candidate)
    } else {
        Ok(x)
    }
}

/// Newton iteration safeguarded by a shrinking bracket: any step leaving the
/// bracket, or failing to halve the bracket fast enough, is replaced by
/// bisection. `fdf` returns `(f(x), f'(x))`.
pub fn safeguarded_newton<F>(mut fdf: F, lo: f64, hi: f64, x0: f64, x_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (fa, _) = fdf(a);
    let (fb, _) = fdf(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket { lo: a, hi: b });
    }
    let rising = fa < 0.0;
    let mut x = x0.clamp(a, b);
    let mut last_width = b - a;
    for _ in 0..100 {
        let (fx, dfx) = fdf(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == rising {
            a = x;
        } else {
            b = x;
        }
        let width = b - a;
        let newton = x - fx / dfx;
        let use_newton =
            dfx.is_finite() && dfx != 0.0 && newton > a && newton < b && width < 0.75 * last_width + f64::MIN_POSITIVE;
        let next = if use_newton { newton } else { 0.5 * (a + b) };
        last_width = width;
        if (next - x).abs() <= x_tol || width <= x_tol {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence("safeguarded Newton".into()))
}
