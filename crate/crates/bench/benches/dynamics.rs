use std::hint::black_box;

use bistable_robin::{
    all_steady_states, linearized_ground_eigenvalue, simulate_scalar, simulate_system, SimConfig, SystemConfig,
    WolbachiaParams,
};
use bistable_robin_bench::{low_exterior, mosquito_model};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn scalar_steps(c: &mut Criterion) {
    let m = mosquito_model();
    let mut group = c.benchmark_group("scalar");
    group.sample_size(20);
    for nodes in [201usize, 801, 3201] {
        let env = low_exterior(8.96);
        let mut cfg = SimConfig::defaults(&m, &env);
        cfg.dx = 2.0 * env.l / (nodes - 1) as f64;
        cfg.t_max = 10.0;
        cfg.snapshot_times.clear();
        let init = vec![0.5; cfg.nodes(env.l)];
        group.bench_with_input(BenchmarkId::new("t10", nodes), &init, |b, init| {
            b.iter(|| simulate_scalar(&m, &env, black_box(init), &cfg).unwrap())
        });
    }
    group.finish();
}

fn system_steps(c: &mut Criterion) {
    let m = mosquito_model();
    let env = low_exterior(2.0);
    let mut group = c.benchmark_group("system");
    group.sample_size(10);
    for eps in [0.1, 0.01] {
        let mut cfg = SimConfig::defaults(&m, &env);
        cfg.dx = 0.02;
        cfg.t_max = 5.0;
        cfg.snapshot_times.clear();
        let sys = SystemConfig::standard(WolbachiaParams::table1(), eps, env.p_ext, 0.5, cfg.nodes(env.l));
        cfg.dt = cfg.dt.min(0.25 / sys.stiffness());
        group.bench_with_input(BenchmarkId::new("t5", eps), &sys, |b, sys| {
            b.iter(|| simulate_system(black_box(sys), &env, &cfg).unwrap())
        });
    }
    group.finish();
}

fn linearized_spectrum(c: &mut Criterion) {
    let m = mosquito_model();
    let env = low_exterior(8.96);
    let profiles = all_steady_states(&m, &env, 1001).unwrap();
    let mut group = c.benchmark_group("ground_eigenvalue");
    for p in profiles.iter().take(3) {
        group.bench_with_input(BenchmarkId::new("n1001", &p.label), p, |b, p| {
            b.iter(|| linearized_ground_eigenvalue(&m, &env, black_box(p), 1001).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scalar_steps, system_steps, linearized_spectrum);
criterion_main!(benches);
