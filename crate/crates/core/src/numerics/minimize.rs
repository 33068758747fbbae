//! Bracketed one-dimensional minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimum of `f` on `[lo, hi]`. Returns the
/// argument and value of the best point seen.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, x_tol: f64) -> (f64, f64) {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > x_tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Global minimum over `[lo, hi]` by sampling `n` equispaced points (ends
/// included) and refining around the best sample with golden section.
///
/// Non-finite samples are skipped. Returns `None` if every sample is non-finite.
pub fn grid_then_golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, x_tol: f64) -> Option<(f64, f64)> {
    let n = n.max(3);
    let h = (hi - lo) / (n - 1) as f64;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..n {
        let x = if i == n - 1 { hi } else { lo + i as f64 * h };
        let v = f(x);
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    let (i, v) = best?;
    let x_best = if i == n - 1 { hi } else { lo + i as f64 * h };
    let a = if i == 0 { lo } else { lo + (i - 1) as f64 * h };
    let b = if i + 1 >= n {
        hi
    } else {
        (lo + (i + 1) as f64 * h).min(hi)
    };
    let (x, fx) = golden_section(
        |t| {
            let y = f(t);
            if y.is_finite() {
                y
            } else {
                f64::INFINITY
            }
        },
        a,
        b,
        x_tol,
    );
    if fx <= v {
        Some((x, fx))
    } else {
        Some((x_best, v))
    }
}
