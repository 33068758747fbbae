//! Linear stability of steady states.
//!
//! The Robin Laplacian `−φ''` with `φ'(±L) = ∓Dφ(±L)` has principal eigenvalue
//! `λ₁`. A steady state is asymptotically stable when `f'(p) < λ₁` everywhere
//! and unstable when `f'(p) > λ₁` everywhere; in between, the smallest
//! eigenvalue `μ₁` of the discretized linearization decides numerically.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bisect, Tridiagonal};
use crate::reaction::{Nonlinearity, ReactionModel};
use crate::steady::{profile_residual, SteadyProfile};
use crate::timemap::BoundaryEnv;

/// Residual bound a profile must meet before it is classified.
pub const VERIFY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    StableByTheorem,
    UnstableByTheorem,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub lambda1: f64,
    pub fprime_min: f64,
    pub fprime_max: f64,
    pub verdict: Verdict,
    /// Smallest eigenvalue of the discretized linearization, when computed.
    pub mu1: Option<f64>,
}

/// Smallest positive root of `√λ·tan(L√λ) = D`, solved as `s·tan(s) = L·D`
/// on `(0, π/2)` with `λ = (s/L)²`.
pub fn principal_eigenvalue(env: &BoundaryEnv) -> f64 {
    let target = env.l * env.d;
    let hi = FRAC_PI_2 * (1.0 - f64::EPSILON);
    let s = bisect(|s| s * s.tan() - target, 0.0, hi, 0.0).unwrap_or(hi);
    (s / env.l).powi(2)
}

/// Exact range of `f'` over `[lo, hi]`: the endpoints plus interior critical points.
pub fn fprime_range(model: &ReactionModel, lo: f64, hi: f64) -> (f64, f64) {
    let mut min = model.df(lo).min(model.df(hi));
    let mut max = model.df(lo).max(model.df(hi));
    for c in model.d2f_roots(lo, hi) {
        let v = model.df(c);
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

fn verdict_for(lambda1: f64, fprime_min: f64, fprime_max: f64) -> Verdict {
    if fprime_max < lambda1 {
        Verdict::StableByTheorem
    } else if fprime_min > lambda1 {
        Verdict::UnstableByTheorem
    } else {
        Verdict::Inconclusive
    }
}

/// Applies the sufficient conditions to a verified steady state.
pub fn classify_stability(
    model: &ReactionModel,
    env: &BoundaryEnv,
    profile: &SteadyProfile,
) -> Result<StabilityVerdict> {
    let r = profile_residual(model, env, profile)?;
    if !(r.interior <= VERIFY_TOL && r.boundary() <= VERIFY_TOL) {
        return Err(Error::UnverifiedProfile {
            interior: r.interior,
            boundary: r.boundary(),
        });
    }
    let lambda1 = principal_eigenvalue(env);
    let (lo, hi) = profile.min_max();
    let (fprime_min, fprime_max) = fprime_range(model, lo, hi);
    Ok(StabilityVerdict {
        lambda1,
        fprime_min,
        fprime_max,
        verdict: verdict_for(lambda1, fprime_min, fprime_max),
        mu1: None,
    })
}

/// [`classify_stability`] plus the numerical `μ₁` on `n` nodes.
pub fn classify_with_oracle(
    model: &ReactionModel,
    env: &BoundaryEnv,
    profile: &SteadyProfile,
    n: usize,
) -> Result<StabilityVerdict> {
    let mut v = classify_stability(model, env, profile)?;
    v.mu1 = Some(linearized_ground_eigenvalue(model, env, profile, n)?);
    Ok(v)
}

fn interpolate(x: &[f64], p: &[f64], at: f64) -> f64 {
    let k = x.partition_point(|&v| v <= at).clamp(1, x.len() - 1);
    let (x0, x1) = (x[k - 1], x[k]);
    let t = if x1 > x0 { (at - x0) / (x1 - x0) } else { 0.0 };
    p[k - 1] + t * (p[k] - p[k - 1])
}

/// Smallest eigenvalue of `−φ'' − f'(p(x))φ` with `φ'(±L) = ∓Dφ(±L)`, by
/// centered differences on `n` nodes (ghost-point Robin closure) and shifted
/// inverse iteration.
pub fn linearized_ground_eigenvalue<N: Nonlinearity + ?Sized>(
    nl: &N,
    env: &BoundaryEnv,
    profile: &SteadyProfile,
    n: usize,
) -> Result<f64> {
    if n < 101 || n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "n must be odd and at least 101, got {n}"
        )));
    }
    let l = env.l;
    let h = 2.0 * l / (n - 1) as f64;
    let ih2 = 1.0 / (h * h);
    let c: Vec<f64> = (0..n)
        .map(|i| nl.df(interpolate(&profile.x, &profile.p, -l + i as f64 * h)))
        .collect();
    let shift = -2.0 * c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    // Symmetrized operator: the end rows are scaled so that the ghost-point
    // coupling 2/h² becomes √2/h² on both sides.
    let mut diag: Vec<f64> = c.iter().map(|ci| 2.0 * ih2 - ci).collect();
    diag[0] += 2.0 * h * env.d * ih2;
    diag[n - 1] += 2.0 * h * env.d * ih2;
    let mut off = vec![-ih2; n - 1];
    off[0] = -std::f64::consts::SQRT_2 * ih2;
    off[n - 2] = -std::f64::consts::SQRT_2 * ih2;
    let shifted: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let lu = Tridiagonal::factor(&off, &shifted, &off)
        .ok_or_else(|| Error::NoConvergence("shifted linearization is singular".into()))?;

    let apply = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut s = diag[i] * v[i];
                if i > 0 {
                    s += off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += off[i] * v[i + 1];
                }
                s
            })
            .collect()
    };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();

    // The ground state has one sign; a cosine bump is a good start.
    let mut v: Vec<f64> = (0..n)
        .map(|i| (FRAC_PI_2 * (-1.0 + 2.0 * i as f64 / (n - 1) as f64)).cos() + 0.1)
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|a| *a /= nv);
    // The Rayleigh quotient carries rounding of order ε/h², so convergence is
    // judged on the residual; the eigenvalue error is then below resid²/gap.
    for _ in 0..20_000 {
        let mut w = v.clone();
        lu.solve_in_place(&mut w);
        let nw = norm(&w);
        w.iter_mut().for_each(|a| *a /= nw);
        let aw = apply(&w);
        let rq: f64 = w.iter().zip(&aw).map(|(a, b)| a * b).sum();
        let resid = aw.iter().zip(&w).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
        v = w;
        if resid <= 1e-8 {
            return Ok(rq);
        }
    }
    Err(Error::NoConvergence(
        "inverse iteration for the ground eigenvalue".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::{make_wolbachia_reaction, WolbachiaParams};
    use crate::steady::{constant_profile, reconstruct_profile, solve_boundary_values};
    use crate::timemap::Branch;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    struct Zero;
    impl Nonlinearity for Zero {
        fn f(&self, _: f64) -> f64 {
            0.0
        }
        fn df(&self, _: f64) -> f64 {
            0.0
        }
    }

    fn table1() -> ReactionModel {
        make_wolbachia_reaction(WolbachiaParams::table1()).unwrap()
    }

    #[test]
    fn eigenvalue_oracle_values() {
        let e = BoundaryEnv::new(1.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(principal_eigenvalue(&e), 0.740_174, epsilon = 1e-6);
        let e = BoundaryEnv::new(8.96, 0.05, 0.1).unwrap();
        assert_relative_eq!(
            principal_eigenvalue(&e),
            0.004_838_393_176_474_455,
            max_relative = 1e-12
        );
        let e = BoundaryEnv::new(12.0, 0.05, 0.8).unwrap();
        assert_relative_eq!(
            principal_eigenvalue(&e),
            0.003_452_203_851_010_641_3,
            max_relative = 1e-12
        );
    }

    #[test]
    fn eigenvalue_solves_defining_equation() {
        for (l, d) in [(0.3, 0.01), (1.0, 1.0), (8.96, 0.05), (50.0, 3.0)] {
            let e = BoundaryEnv::new(l, d, 0.5).unwrap();
            let lam = principal_eigenvalue(&e);
            let r = lam.sqrt() * (l * lam.sqrt()).tan();
            assert_relative_eq!(r, d, max_relative = 1e-12);
            assert!(lam > 0.0 && lam < std::f64::consts::PI.powi(2) / (4.0 * l * l));
        }
    }

    #[test]
    fn eigenvalue_approaches_dirichlet_limit() {
        let lim = std::f64::consts::PI.powi(2) / 4.0;
        let mut prev = 0.0;
        for d in [1.0, 10.0, 100.0, 1e4, 1e8] {
            let lam = principal_eigenvalue(&BoundaryEnv::new(1.0, d, 0.5).unwrap());
            assert!(lam > prev && lam < lim);
            prev = lam;
        }
        assert!(lim - prev < 1e-6);
    }

    #[test]
    fn pure_diffusion_oracle_matches_lambda1() {
        let m = table1();
        let e = BoundaryEnv::new(1.0, 1.0, 0.5).unwrap();
        let profile = constant_profile(&m, &e, 11);
        let coarse = linearized_ground_eigenvalue(&Zero, &e, &profile, 1001).unwrap();
        let fine = linearized_ground_eigenvalue(&Zero, &e, &profile, 2001).unwrap();
        let lam = principal_eigenvalue(&e);
        assert_abs_diff_eq!(coarse, lam, epsilon = 1e-5);
        // second order: error ratio near 4
        let ratio = (coarse - lam) / (fine - lam);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn constant_theta_state_is_linearly_unstable() {
        let m = table1();
        let e = BoundaryEnv::new(8.96, 0.05, m.theta()).unwrap();
        let profile = constant_profile(&m, &e, 101);
        let mu = linearized_ground_eigenvalue(&m, &e, &profile, 1001).unwrap();
        let expected = principal_eigenvalue(&e) - m.df(m.theta());
        assert_abs_diff_eq!(mu, expected, epsilon = 1e-6);
        assert!(mu < 0.0);
    }

    #[test]
    fn rejects_even_or_small_n() {
        let m = table1();
        let e = BoundaryEnv::new(1.0, 1.0, 0.5).unwrap();
        let profile = constant_profile(&m, &e, 11);
        assert!(linearized_ground_eigenvalue(&m, &e, &profile, 100).is_err());
        assert!(linearized_ground_eigenvalue(&m, &e, &profile, 1000).is_err());
    }

    #[test]
    fn verdicts_at_896() {
        let m = table1();
        let e = BoundaryEnv::new(8.96, 0.05, 0.1).unwrap();
        let sd = solve_boundary_values(&m, &e, Branch::SD).unwrap().roots;
        let low = reconstruct_profile(&m, &e, Branch::SD, sd[0], 1001).unwrap();
        let high = reconstruct_profile(&m, &e, Branch::SD, sd[1], 1001).unwrap();
        let v_low = classify_with_oracle(&m, &e, &low, 1001).unwrap();
        let v_high = classify_with_oracle(&m, &e, &high, 1001).unwrap();
        assert_eq!(v_high.verdict, Verdict::StableByTheorem);
        assert_eq!(v_low.verdict, Verdict::UnstableByTheorem);
        assert!(v_low.fprime_min > 0.0462);
        assert!(v_high.mu1.unwrap() > 0.0);
        assert!(v_low.mu1.unwrap() < 0.0);
    }

    #[test]
    fn garbage_profile_is_rejected() {
        let m = table1();
        let e = BoundaryEnv::new(2.0, 0.05, 0.1).unwrap();
        let mut profile = constant_profile(&m, &e, 101);
        profile.p.iter_mut().for_each(|v| *v = 0.5);
        assert!(matches!(
            classify_stability(&m, &e, &profile),
            Err(Error::UnverifiedProfile { .. })
        ));
    }
}
