//! Randomized invariants over model parameters and environments.

use bistable_robin::*;
use proptest::prelude::*;

fn table1() -> ReactionModel {
    make_wolbachia_reaction(WolbachiaParams::table1()).unwrap()
}

/// Reference rates, each perturbed, kept when the term is still bistable.
fn wolbachia_models() -> impl Strategy<Value = ReactionModel> {
    (0.5..2.0f64, 0.1..0.5f64, 1.02..1.3f64, 0.0..0.3f64, 0.6..0.95f64).prop_filter_map(
        "bistable parameters",
        |(b_u, d_u, delta, s_f, s_h)| {
            let p = WolbachiaParams {
                b_u,
                d_u,
                delta,
                s_f,
                s_h,
                k: 1.0,
            };
            make_wolbachia_reaction(p).ok()
        },
    )
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn models() -> impl Strategy<Value = ReactionModel> {
    prop_oneof![
        wolbachia_models(),
        (0.05..0.45f64).prop_map(|t| make_cubic_reaction(t).unwrap()),
    ]
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn landmarks_are_ordered(m in models()) {
        let lm = m.landmarks();
        prop_assert!(0.0 < lm.alpha1 && lm.alpha1 < lm.theta && lm.theta < lm.alpha2 && lm.alpha2 < 1.0);
        prop_assert!(lm.theta < lm.beta && lm.beta < 1.0);
        prop_assert!(lm.f_theta < 0.0 && lm.f_one > 0.0);
        prop_assert!(m.big_f(lm.beta).abs() < 1e-12);
        prop_assert!(m.f(lm.theta).abs() < 1e-12);
    }

    #[test]
    fn reaction_has_bistable_signs(m in models(), u in 0.001..0.999f64) {
        let theta = m.theta();
        let f = m.f(u);
        if u < theta - 1e-9 {
            prop_assert!(f < 0.0);
        } else if u > theta + 1e-9 {
            prop_assert!(f > 0.0);
        }
        prop_assert_eq!(m.f(0.0), 0.0);
        prop_assert!(m.f(1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_branches_recover_levels(m in models(), t in 0.001..0.999f64) {
        let lm = m.landmarks();
        let y = lm.f_theta + t * (lm.f_one - lm.f_theta);
        let up = invert_f(&m, FBranch::Upper, y).unwrap();
        prop_assert!(up >= lm.theta && (m.big_f(up) - y).abs() < 1e-10);
        if y < 0.0 {
            let down = invert_f(&m, FBranch::Lower, y).unwrap();
            prop_assert!(down <= lm.theta && (m.big_f(down) - y).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalue_is_bracketed_and_monotone(l in 0.1..50.0f64, d in 1e-3..20.0f64, k in 1.01..3.0f64) {
        let e = BoundaryEnv::new(l, d, 0.5).unwrap();
        let lam = principal_eigenvalue(&e);
        prop_assert!(lam > 0.0 && lam < std::f64::consts::PI.powi(2) / (4.0 * l * l));
        let r = lam.sqrt() * (l * lam.sqrt()).tan();
        prop_assert!(((r - d) / d).abs() < 1e-12);
        prop_assert!(principal_eigenvalue(&BoundaryEnv::new(l, d * k, 0.5).unwrap()) > lam);
        prop_assert!(principal_eigenvalue(&BoundaryEnv::new(l * k, d, 0.5).unwrap()) < lam);
    }

    #[test]
    fn minimizer_is_a_critical_point(m in models(), d in 0.01..2.0f64, p_ext in 0.01..0.99f64) {
        let e = BoundaryEnv::new(1.0, d, p_ext).unwrap();
        let q = minimizer_qbar(&m, &e);
        let g = |x: f64| potential_g(&m, &e, x).unwrap();
        prop_assert!(g(q) <= g((q - 1e-4).max(0.0)) + 1e-15);
        prop_assert!(g(q) <= g((q + 1e-4).min(1.0)) + 1e-15);
        prop_assert!((m.f(q) + d * d * (q - p_ext)).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn time_map_round_trips(d in 0.02..1.0f64, p_ext in 0.02..0.98f64, t in 0.05..0.95f64, sd in any::<bool>()) {
        let m = table1();
        let branch = if sd { Branch::SD } else { Branch::SI };
        let base = BoundaryEnv::new(1.0, d, p_ext).unwrap();
        let dom = time_map_domain(&m, &base, branch).unwrap();
        prop_assume!(!dom.empty);
        let q = dom.lo + t * (dom.hi - dom.lo);
        let l = time_map(&m, &base, branch, q).unwrap();
        prop_assume!(l > 1e-3 && l < 200.0);
        let e = base.with_l(l);
        let roots = solve_boundary_values(&m, &e, branch).unwrap().roots;
        let hit = roots.iter().any(|r| (r - q).abs() < 1e-8);
        prop_assert!(hit, "q = {q}, L = {l}, roots = {roots:?}");
        for r in roots {
            prop_assert!((time_map(&m, &e, branch, r).unwrap() - l).abs() < 1e-8);
        }
    }

    #[test]
    fn reconstructed_profiles_conserve_energy(l in 0.3..15.0f64, d in 0.02..1.0f64, p_ext in 0.02..0.98f64) {
        let m = table1();
        let e = BoundaryEnv::new(l, d, p_ext).unwrap();
        for s in all_steady_states(&m, &e, 1001).unwrap() {
            let r = profile_residual(&m, &e, &s).unwrap();
            prop_assert!(r.energy_drift < 1e-8, "{}: {r:?}", s.label);
            prop_assert!(r.interior < 1e-4, "{}: {r:?}", s.label);
            prop_assert!(s.p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn scalar_flow_is_order_preserving(p_ext in 0.05..0.95f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let m = table1();
        let e = BoundaryEnv::new(3.0, 0.05, p_ext).unwrap();
        let mut cfg = SimConfig::defaults(&m, &e);
        cfg.t_max = 20.0;
        cfg.dx = 0.05;
        let n = cfg.nodes(e.l);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let x = cfg.grid(e.l);
        let low: Vec<f64> = x.iter().map(|v| lo * (1.0 - 0.1 * (v / e.l).powi(2))).collect();
        let high = vec![hi; n];
        let sa = simulate_scalar(&m, &e, &low, &cfg).unwrap();
        let sb = simulate_scalar(&m, &e, &high, &cfg).unwrap();
        prop_assert_eq!(sa.clipped, 0);
        for (u, v) in sa.snapshots.iter().zip(&sb.snapshots) {
            prop_assert!(u.p.iter().zip(&v.p).all(|(p, q)| p <= q && (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn system_keeps_densities_nonnegative(eps in 0.02..0.5f64, p_ext in 0.0..1.0f64, p0 in 0.0..1.0f64) {
        let params = WolbachiaParams::table1();
        let e = BoundaryEnv::new(1.0, 0.05, p_ext.clamp(1e-3, 0.999)).unwrap();
        let mut cfg = SimConfig::defaults(&table1(), &e);
        cfg.t_max = 2.0;
        cfg.dx = 0.05;
        let sys = SystemConfig::standard(params, eps, e.p_ext, p0.min(0.99), cfg.nodes(e.l));
        cfg.dt = 0.25 / sys.stiffness();
        let tr = simulate_system(&sys, &e, &cfg).unwrap();
        let last = tr.last();
        prop_assert!(last.n_i.as_ref().unwrap().iter().chain(last.n_u.as_ref().unwrap()).all(|v| *v >= 0.0));
        prop_assert!(last.p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
