//! End-to-end scenarios on the reference mosquito model and the cubic test model, with
//! reference values from an independent high-precision computation.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use bistable_robin::*;

fn table1() -> ReactionModel {
    make_wolbachia_reaction(WolbachiaParams::table1()).unwrap()
}

fn env(l: f64, d: f64, p_ext: f64) -> BoundaryEnv {
    BoundaryEnv::new(l, d, p_ext).unwrap()
}

fn sorted_by_center(all: &[SteadyProfile], class: ProfileClass) -> Vec<&SteadyProfile> {
    let mut v: Vec<_> = all.iter().filter(|s| s.class == class).collect();
    v.sort_by(|a, b| a.p_at_0.total_cmp(&b.p_at_0));
    v
}

#[test]
fn landmark_reference_values() {
    let m = table1();
    let lm = m.landmarks();
    assert_relative_eq!(lm.theta, 0.2375, max_relative = 1e-14);
    assert_abs_diff_eq!(lm.beta, 0.363352381276992, epsilon = 1e-11);
    assert_abs_diff_eq!(lm.alpha1, 0.11632687539527219, epsilon = 1e-11);
    assert_abs_diff_eq!(lm.alpha2, 0.6984190658763695, epsilon = 1e-11);
    assert_abs_diff_eq!(lm.f_theta, -0.0005204374009328046, epsilon = 1e-14);
    assert_abs_diff_eq!(lm.f_one, 0.013626436534962535, epsilon = 1e-14);
}

#[test]
fn threshold_reference_values() {
    let m = table1();
    let low = thresholds(&m, &env(1.0, 0.05, 0.1)).unwrap();
    assert_relative_eq!(low.m_d.value.value(), 0.8819331629, max_relative = 1e-8);
    assert_relative_eq!(low.m_star.value.value(), 8.632591550, max_relative = 1e-7);
    assert_eq!(low.m_i.value, Extended::Zero);
    assert!(low.d_star.is_none());

    let high = thresholds(&m, &env(1.0, 0.05, 0.8)).unwrap();
    assert_relative_eq!(high.m_i.value.value(), 10.364643932549829, max_relative = 1e-8);
    assert_eq!(high.m_d.value, Extended::Zero);

    let (d_star, at) = critical_diffusion_point(&m, 0.8).unwrap().unwrap();
    assert_relative_eq!(d_star, 0.05911371678638453, max_relative = 1e-8);
    assert_abs_diff_eq!(at, 0.26949837393230636, epsilon = 1e-7);
}

#[test]
fn si_threshold_is_infinite_above_critical_diffusion() {
    let m = table1();
    let t = thresholds(&m, &env(1.0, 0.5, 0.8)).unwrap();
    assert_eq!(t.m_i.value, Extended::Infinite);
    assert!(time_map_domain(&m, &env(1.0, 0.5, 0.8), Branch::SI).unwrap().empty);
}

#[test]
fn sd_boundary_values_at_reference_length() {
    let m = table1();
    let roots = solve_boundary_values(&m, &env(8.96, 0.05, 0.1), Branch::SD)
        .unwrap()
        .roots;
    assert_eq!(roots.len(), 2);
    assert_abs_diff_eq!(roots[0], 0.22158656851818515, epsilon = 1e-9);
    assert_abs_diff_eq!(roots[1], 0.9057760023318919, epsilon = 1e-9);
}

#[test]
fn cubic_minimizer_reference() {
    let m = make_cubic_reaction(0.2).unwrap();
    assert_abs_diff_eq!(
        minimizer_qbar(&m, &env(1.0, 1.0, 0.1)),
        0.10884191070175019,
        epsilon = 1e-10
    );
    let (d_star, at) = critical_diffusion_point(&m, 0.9).unwrap().unwrap();
    assert_abs_diff_eq!(d_star, 0.0710, epsilon = 1e-4);
    assert_abs_diff_eq!(at, 0.2200, epsilon = 1e-4);
}

#[test]
fn sd_root_count_steps_at_monotone_threshold() {
    let m = table1();
    let m_d = thresholds(&m, &env(1.0, 0.05, 0.1)).unwrap().m_d.value.value();
    let count = |l: f64| {
        solve_boundary_values(&m, &env(l, 0.05, 0.1), Branch::SD)
            .unwrap()
            .roots
            .len()
    };
    assert_eq!(count(0.98 * m_d), 0);
    assert_eq!(count(1.02 * m_d), 2);
}

#[test]
fn si_root_count_steps_at_monotone_threshold() {
    let m = table1();
    let m_i = thresholds(&m, &env(1.0, 0.05, 0.8)).unwrap().m_i.value.value();
    let count = |l: f64| {
        solve_boundary_values(&m, &env(l, 0.05, 0.8), Branch::SI)
            .unwrap()
            .roots
            .len()
    };
    assert_eq!(count(0.98 * m_i), 0);
    assert_eq!(count(1.02 * m_i), 2);
}

#[test]
fn branch_table_reuse_matches_direct_solve() {
    let m = table1();
    let base = env(1.0, 0.05, 0.1);
    let table = BranchTable::new(&m, base, Branch::SD).unwrap();
    for l in [0.5, 2.0, 8.96] {
        let direct = solve_boundary_values(&m, &base.with_l(l), Branch::SD).unwrap().roots;
        assert_eq!(table.roots(l), direct);
    }
}

#[test]
fn profiles_are_ordered_and_shaped() {
    let m = table1();
    let e = env(8.96, 0.05, 0.1);
    let all = all_steady_states(&m, &e, 1001).unwrap();
    let sd = sorted_by_center(&all, ProfileClass::SD);
    let si = sorted_by_center(&all, ProfileClass::SI);
    // Symmetric states are ordered pointwise: SI below both SD states.
    for j in 0..1001 {
        assert!(si[0].p[j] <= sd[0].p[j] && sd[0].p[j] <= sd[1].p[j]);
    }
    for s in sd.iter().chain(&si) {
        let mid = 500;
        for j in 0..1001 {
            assert_abs_diff_eq!(s.p[j], s.p[1000 - j], epsilon = 1e-12);
        }
        let rising = s.class == ProfileClass::SI;
        assert!(s.p[mid..].windows(2).all(|w| (w[1] >= w[0]) == rising || w[1] == w[0]));
    }
}

#[test]
fn non_monotone_states_come_in_mirror_pairs() {
    let m = table1();
    let e = env(8.96, 0.05, 0.1);
    let ns = construct_non_monotone(&m, &e, 1001).unwrap();
    assert_eq!(ns.len(), 2);
    for j in 0..1001 {
        assert_abs_diff_eq!(ns[0].p[j], ns[1].p[1000 - j], epsilon = 1e-12);
    }
    assert_abs_diff_eq!(ns[0].p_at_minus_l, 0.3342823924785001, epsilon = 1e-9);
    assert_abs_diff_eq!(ns[0].p_at_l, 0.08551559627458222, epsilon = 1e-9);
    let (lo, hi) = ns[0].min_max();
    assert_abs_diff_eq!(lo, 0.0854301949652582, epsilon = 1e-6);
    assert_abs_diff_eq!(hi, 0.3441463536704864, epsilon = 1e-6);
    let r = profile_residual(&m, &e, &ns[0]).unwrap();
    assert!(r.interior < 1e-5 && r.boundary() < 1e-6, "{r:?}");
    assert!(nonmonotone_threshold_mstar(&m, &e).unwrap().value.value() < e.l);
}

#[test]
fn constant_state_exists_only_at_theta() {
    let m = table1();
    let e = env(3.0, 0.05, m.theta());
    let all = all_steady_states(&m, &e, 301).unwrap();
    let constants: Vec<_> = all.iter().filter(|s| s.class == ProfileClass::Constant).collect();
    assert_eq!(constants.len(), 1);
    assert!(constants[0].p.iter().all(|v| *v == m.theta()));
    let v = classify_stability(&m, &e, constants[0]).unwrap();
    assert_eq!(v.verdict, Verdict::UnstableByTheorem);
}

#[test]
fn oracle_refines_at_second_order() {
    let m = table1();
    let e = env(8.96, 0.05, 0.1);
    // Profiles are rebuilt on each operator grid so no interpolation enters.
    let mu = |n: usize| -> Vec<(String, f64)> {
        all_steady_states(&m, &e, n)
            .unwrap()
            .iter()
            .map(|s| (s.label.clone(), linearized_ground_eigenvalue(&m, &e, s, n).unwrap()))
            .collect()
    };
    let (a, b, c) = (mu(1001), mu(2001), mu(4001));
    for ((label, coarse), ((_, fine), (_, finer))) in a.iter().zip(b.iter().zip(&c)) {
        let ratio = (coarse - fine) / (fine - finer);
        assert!((3.0..5.0).contains(&ratio), "{label}: ratio {ratio}");
    }
}

#[test]
fn verdicts_agree_with_oracle_sign() {
    let m = table1();
    for e in [
        env(0.5, 0.05, 0.1),
        env(8.96, 0.05, 0.1),
        env(2.0, 0.05, 0.8),
        env(12.0, 0.05, 0.8),
        env(12.0, 0.5, 0.8),
    ] {
        for s in all_steady_states(&m, &e, 1001).unwrap() {
            let v = classify_with_oracle(&m, &e, &s, 1001).unwrap();
            let mu = v.mu1.unwrap();
            match v.verdict {
                Verdict::StableByTheorem => assert!(mu > 0.0, "{}", s.label),
                Verdict::UnstableByTheorem => assert!(mu < 0.0, "{}", s.label),
                Verdict::Inconclusive => {}
            }
        }
    }
}

#[test]
fn profiles_outside_the_convex_window_are_stable() {
    let m = table1();
    let lm = m.landmarks();
    for e in [
        env(0.5, 0.05, 0.1),
        env(2.0, 0.05, 0.8),
        env(12.0, 0.5, 0.8),
        env(8.96, 0.05, 0.1),
    ] {
        for s in all_steady_states(&m, &e, 1001).unwrap() {
            let (lo, hi) = s.min_max();
            if hi < lm.alpha1 || lo > lm.alpha2 {
                let v = classify_stability(&m, &e, &s).unwrap();
                assert_eq!(v.verdict, Verdict::StableByTheorem, "{}", s.label);
            }
        }
    }
}

fn ground_mode(e: &BoundaryEnv, x: &[f64]) -> Vec<f64> {
    let k = principal_eigenvalue(e).sqrt();
    x.iter().map(|v| (k * v).cos()).collect()
}

#[test]
fn perturbations_of_stable_and_unstable_states() {
    let m = table1();
    let e = env(8.96, 0.05, 0.1);
    let mut cfg = SimConfig::defaults(&m, &e);
    let x = cfg.grid(e.l);
    let all = all_steady_states(&m, &e, x.len()).unwrap();
    let sd = sorted_by_center(&all, ProfileClass::SD);
    let phi = ground_mode(&e, &x);
    let nudged =
        |p: &[f64], s: f64| -> Vec<f64> { p.iter().zip(&phi).map(|(v, f)| (v + s * f).clamp(0.0, 1.0)).collect() };
    cfg.t_max = 3000.0;

    for sign in [1.0, -1.0] {
        let (rel, _) = relax_to_steady(&m, &e, &nudged(&sd[1].p, 0.01 * sign), &cfg, 1e-9).unwrap();
        assert_eq!(rel.label, sd[1].label);
        assert!(rel.distance < 1e-4);
    }
    let tr = simulate_scalar(&m, &e, &nudged(&sd[0].p, 0.01), &cfg).unwrap();
    let departure = tr
        .last()
        .p
        .iter()
        .zip(&sd[0].p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(departure > 0.05);
}

#[test]
fn relaxation_from_a_stable_state_is_immediate() {
    let m = table1();
    let e = env(2.0, 0.05, 0.8);
    let cfg = SimConfig::defaults(&m, &e);
    let start = all_steady_states(&m, &e, cfg.nodes(e.l)).unwrap().remove(0);
    let (rel, tr) = relax_to_steady(&m, &e, &start.p, &cfg, 1e-6).unwrap();
    assert_eq!(rel.label, start.label);
    assert!(rel.distance < 1e-6);
    assert!(tr.last().t < 5.0);
}

#[test]
fn ordered_starts_stay_ordered() {
    let m = table1();
    for e in [env(0.5, 0.05, 0.1), env(8.96, 0.05, 0.1), env(12.0, 0.05, 0.8)] {
        let cfg = SimConfig::defaults(&m, &e);
        let x = cfg.grid(e.l);
        let low: Vec<f64> = x.iter().map(|v| 0.3 + 0.1 * (v / e.l)).collect();
        let high: Vec<f64> = low.iter().map(|v| v + 0.05).collect();
        let a = simulate_scalar(&m, &e, &low, &cfg).unwrap();
        let b = simulate_scalar(&m, &e, &high, &cfg).unwrap();
        assert_eq!(a.snapshots.len(), 5);
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            assert!(sa.p.iter().zip(&sb.p).all(|(u, v)| u <= v));
        }
    }
}

#[test]
fn scalar_scheme_is_second_order_in_space() {
    let m = table1();
    let e = env(0.5, 0.05, 0.1);
    let run = |dx: f64, dt: f64| {
        let cfg = SimConfig {
            dx,
            dt,
            t_max: 10.0,
            diffusion: 1.0,
            snapshot_times: vec![],
        };
        let n = cfg.nodes(e.l);
        simulate_scalar(&m, &e, &vec![0.5; n], &cfg).unwrap().last().p.clone()
    };
    // Compare on the coarse nodes; time error is first order, so dt is kept
    // small enough not to mask the spatial rate.
    let dt = 1e-3;
    let a = run(0.02, dt);
    let b = run(0.01, dt);
    let c = run(0.005, dt);
    let diff = |u: &[f64], v: &[f64], stride: usize| {
        u.iter()
            .enumerate()
            .map(|(j, x)| (x - v[j * stride]).abs())
            .fold(0.0, f64::max)
    };
    let ratio = diff(&a, &b, 2) / diff(&b, &c, 2);
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn epsilon_error_is_dominated_by_epsilon() {
    let m = table1();
    let params = WolbachiaParams::table1();
    let e = env(2.0, 0.05, 0.1);
    let mut cfg = SimConfig::defaults(&m, &e);
    cfg.t_max = 50.0;
    let coarse = epsilon_convergence_study(&m, params, &e, 0.5, &cfg, &[0.01]).unwrap()[0];
    cfg.dx /= 2.0;
    cfg.dt /= 2.0;
    let fine = epsilon_convergence_study(&m, params, &e, 0.5, &cfg, &[0.01]).unwrap()[0];
    assert!(((coarse.l2_error - fine.l2_error) / fine.l2_error).abs() < 0.25);
}

#[test]
fn uninfected_growth_ignores_incompatibility_when_it_is_off() {
    let base = WolbachiaParams::table1();
    let off = WolbachiaParams { s_h: 0.0, ..base };
    let (n_i, n_u, eps) = (0.3, 0.4, 0.05);
    let crowding = 1.0 - (n_i + n_u) / base.k;
    let (_, r_u) = species_rates(&off, eps, n_i, n_u);
    let free = base.b_u / eps * n_u * crowding - base.d_u * n_u;
    assert_relative_eq!(r_u, free, max_relative = 1e-15);
    let (_, r_ci) = species_rates(&base, eps, n_i, n_u);
    assert!(r_ci < r_u);

    let e = env(1.0, 0.05, 0.1);
    let cfg = SimConfig {
        dx: 0.05,
        dt: 1e-3,
        t_max: 0.1,
        diffusion: 1.0,
        snapshot_times: vec![0.0],
    };
    let sys = SystemConfig::standard(off, eps, 0.1, 0.5, cfg.nodes(e.l));
    let tr = simulate_system(&sys, &e, &cfg).unwrap();
    assert!(tr.snapshots[0].p.iter().all(|v| *v == 0.5));
    assert!(tr.last().n_u.as_ref().unwrap().iter().all(|v| *v >= 0.0));
}

/// Integrates `p'' = −f(p)` from `x = −L` with the left Robin data, sampling
/// at the profile's nodes.
fn shoot(m: &ReactionModel, e: &BoundaryEnv, p0: f64, x: &[f64], sub: usize) -> (Vec<f64>, f64) {
    let rhs = |(p, v): (f64, f64)| (v, -m.f(p.clamp(0.0, 1.0)));
    let mut y = (p0, e.d * (p0 - e.p_ext));
    let mut out = vec![p0];
    for w in x.windows(2) {
        let h = (w[1] - w[0]) / sub as f64;
        for _ in 0..sub {
            let k1 = rhs(y);
            let k2 = rhs((y.0 + 0.5 * h * k1.0, y.1 + 0.5 * h * k1.1));
            let k3 = rhs((y.0 + 0.5 * h * k2.0, y.1 + 0.5 * h * k2.1));
            let k4 = rhs((y.0 + h * k3.0, y.1 + h * k3.1));
            y.0 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            y.1 += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        out.push(y.0);
    }
    (out, y.1)
}

#[test]
fn shooting_reproduces_every_constructed_state() {
    let m = table1();
    for e in [env(8.96, 0.05, 0.1), env(12.0, 0.05, 0.8)] {
        let all = all_steady_states(&m, &e, 1001).unwrap();
        assert!(all.iter().any(|s| s.class == ProfileClass::NonSM));
        for s in &all {
            let (p, slope) = shoot(&m, &e, s.p_at_minus_l, &s.x, 8);
            let gap = p.iter().zip(&s.p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-6, "{}: max gap {gap:e}", s.label);
            let right = slope + e.d * (p[p.len() - 1] - e.p_ext);
            assert!(right.abs() < 1e-7, "{}: right boundary residual {right:e}", s.label);
        }
    }
}
