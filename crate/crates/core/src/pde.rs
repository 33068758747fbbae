//! Time integration: backward Euler for diffusion, forward Euler for reaction.
//!
//! Robin conditions are closed with a ghost node eliminated through the
//! centered flux, which keeps the boundary second order. The same scheme runs
//! the scalar proportion equation and the two-species infected/uninfected
//! system whose fast-fecundity limit (`ε → 0`) is the scalar equation.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::Tridiagonal;
use crate::reaction::{Nonlinearity, ReactionModel, WolbachiaParams};
use crate::steady::{all_steady_states, symmetric_grid, SteadyProfile};
use crate::timemap::BoundaryEnv;

/// Values closer than this to `[0, 1]` are clipped without being counted.
const CLIP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dx: f64,
    pub dt: f64,
    pub t_max: f64,
    /// Diffusion coefficient.
    pub diffusion: f64,
    pub snapshot_times: Vec<f64>,
}

impl SimConfig {
    /// `dx = L/200`, `dt = min(0.1, 0.25/max|f'|)`, `t_max = 100`, snapshots at
    /// 10, 20, 40, 60 and 100.
    pub fn defaults<N: Nonlinearity + ?Sized>(nl: &N, env: &BoundaryEnv) -> Self {
        let rate = max_abs_slope(nl);
        Self {
            dx: env.l / 200.0,
            dt: if rate > 0.0 { (0.25 / rate).min(0.1) } else { 0.1 },
            t_max: 100.0,
            diffusion: 1.0,
            snapshot_times: vec![10.0, 20.0, 40.0, 60.0, 100.0],
        }
    }

    /// Node positions for a domain of half-length `l`.
    pub fn grid(&self, l: f64) -> Vec<f64> {
        symmetric_grid(l, self.nodes(l))
    }

    pub fn nodes(&self, l: f64) -> usize {
        ((2.0 * l / self.dx).round() as usize).max(2) + 1
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.dx) && ok(self.dt) && ok(self.t_max) && ok(self.diffusion)) {
            return Err(Error::InvalidParameter(
                "dx, dt, t_max and diffusion must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

fn max_abs_slope<N: Nonlinearity + ?Sized>(nl: &N) -> f64 {
    (0..=1000).map(|i| nl.df(i as f64 / 1000.0).abs()).fold(0.0, f64::max)
}

/// The two-species model in its fast-fecundity scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub params: WolbachiaParams,
    pub epsilon: f64,
    pub n_i_ext: f64,
    pub n_u_ext: f64,
    pub n_i_init: Vec<f64>,
    pub n_u_init: Vec<f64>,
}

impl SystemConfig {
    /// Exterior densities `p_ext·K` and `(1 − p_ext)·K`, and an initial
    /// state at total density `K` with infected proportion `p_init`.
    pub fn standard(params: WolbachiaParams, epsilon: f64, p_ext: f64, p_init: f64, nodes: usize) -> Self {
        Self {
            params,
            epsilon,
            n_i_ext: p_ext * params.k,
            n_u_ext: (1.0 - p_ext) * params.k,
            n_i_init: vec![p_init * params.k; nodes],
            n_u_init: vec![(1.0 - p_init) * params.k; nodes],
        }
    }

    fn validate(&self, nodes: usize) -> Result<()> {
        // The system itself does not need bistability, only meaningful rates.
        let w = &self.params;
        if !([w.b_u, w.d_u, w.delta, w.k].iter().all(|v| *v > 0.0 && v.is_finite())
            && (0.0..=1.0).contains(&w.s_f)
            && (0.0..=1.0).contains(&w.s_h))
        {
            return Err(Error::InvalidParameter(
                "system needs b_u, d_u, delta, K > 0 and s_f, s_h in [0, 1]".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if !(self.n_u_ext > 0.0 && self.n_i_ext >= 0.0) {
            return Err(Error::InvalidParameter(
                "exterior densities need n_u_ext > 0 and n_i_ext >= 0".into(),
            ));
        }
        if self.n_i_init.len() != nodes || self.n_u_init.len() != nodes {
            return Err(Error::InvalidParameter(format!(
                "initial densities must have {nodes} values"
            )));
        }
        if self.n_i_init.iter().chain(&self.n_u_init).any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("initial densities must be nonnegative".into()));
        }
        if self.n_u_init.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidParameter(
                "uninfected initial density must not vanish identically".into(),
            ));
        }
        Ok(())
    }

    /// Largest reaction rate, which bounds the explicit step.
    pub fn stiffness(&self) -> f64 {
        self.params.b_u / self.epsilon + self.params.delta * self.params.d_u
    }
}

/// Reaction rates `(R_i, R_u)` of the two-species system at densities
/// `(n_i, n_u)`; the total must be positive.
pub fn species_rates(w: &WolbachiaParams, epsilon: f64, n_i: f64, n_u: f64) -> (f64, f64) {
    let fast = w.b_u / epsilon;
    let total = n_i + n_u;
    let crowding = 1.0 - total / w.k;
    let r_i = (1.0 - w.s_f) * fast * n_i * crowding - w.delta * w.d_u * n_i;
    let r_u = fast * n_u * (1.0 - w.s_h * n_i / total) * crowding - w.d_u * n_u;
    (r_i, r_u)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    /// Proportion of infected (the scalar unknown, or `n_i/(n_i + n_u)`).
    pub p: Vec<f64>,
    pub n_i: Option<Vec<f64>>,
    pub n_u: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Sup norm of the discrete time derivative over the last step.
    pub final_rate: f64,
    /// Node updates that left the admissible range by more than round-off and were clipped.
    pub clipped: usize,
    pub max_excursion: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory always holds the final state")
    }
}

/// Factored implicit-diffusion operator with ghost-node Robin rows.
struct Implicit {
    lu: Tridiagonal,
    // Right-hand-side boundary source per unit exterior value.
    source: f64,
}

impl Implicit {
    fn new(nodes: usize, dx: f64, dt: f64, diffusion: f64, d: f64) -> Result<Self> {
        let r = diffusion * dt / (dx * dx);
        let mut diag = vec![1.0 + 2.0 * r; nodes];
        let mut lower = vec![-r; nodes - 1];
        let mut upper = vec![-r; nodes - 1];
        diag[0] += 2.0 * r * dx * d;
        diag[nodes - 1] += 2.0 * r * dx * d;
        upper[0] = -2.0 * r;
        lower[nodes - 2] = -2.0 * r;
        let lu = Tridiagonal::factor(&lower, &diag, &upper)
            .ok_or_else(|| Error::NoConvergence("implicit diffusion factorization".into()))?;
        Ok(Self {
            lu,
            source: 2.0 * r * dx * d,
        })
    }

    fn step(&self, rhs: &mut [f64], exterior: f64) {
        let n = rhs.len();
        rhs[0] += self.source * exterior;
        rhs[n - 1] += self.source * exterior;
        self.lu.solve_in_place(rhs);
    }
}

struct Clip {
    count: usize,
    worst: f64,
}

impl Clip {
    fn apply(&mut self, v: &mut f64, lo: f64, hi: f64) {
        let out = if *v < lo {
            lo - *v
        } else if *v > hi {
            *v - hi
        } else {
            0.0
        };
        if out > 0.0 {
            if out > CLIP_SLACK {
                self.count += 1;
                self.worst = self.worst.max(out);
            }
            *v = v.clamp(lo, hi);
        }
    }
}

/// Step count and exact step so that `t_max` is hit.
fn schedule(cfg: &SimConfig) -> (usize, f64) {
    let steps = (cfg.t_max / cfg.dt).ceil().max(1.0) as usize;
    (steps, cfg.t_max / steps as f64)
}

fn snapshot_steps(cfg: &SimConfig, dt: f64, steps: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .filter(|t| **t >= 0.0 && **t <= cfg.t_max)
        .map(|t| ((t / dt).round() as usize).min(steps))
        .collect();
    idx.push(steps);
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Integrates the scalar problem from `p_init` (one value per node of `cfg.grid(env.l)`).
pub fn simulate_scalar<N: Nonlinearity + ?Sized>(
    nl: &N,
    env: &BoundaryEnv,
    p_init: &[f64],
    cfg: &SimConfig,
) -> Result<Trajectory> {
    env.validate()?;
    run_scalar(nl, env.l, env.d, env.p_ext, p_init, cfg, None)
}

fn run_scalar<N: Nonlinearity + ?Sized>(
    nl: &N,
    l: f64,
    d: f64,
    p_ext: f64,
    p_init: &[f64],
    cfg: &SimConfig,
    stop_rate: Option<f64>,
) -> Result<Trajectory> {
    cfg.validate()?;
    let limit = 0.5 / max_abs_slope(nl);
    if cfg.dt > limit {
        return Err(Error::StepTooLarge { dt: cfg.dt, limit });
    }
    let x = cfg.grid(l);
    let nodes = x.len();
    if p_init.len() != nodes {
        return Err(Error::InvalidParameter(format!(
            "initial field has {} values, grid has {nodes}",
            p_init.len()
        )));
    }
    if let Some(v) = p_init.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::OutOfRange {
            what: "initial proportion",
            value: *v,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let dx = 2.0 * l / (nodes - 1) as f64;
    let (steps, dt) = schedule(cfg);
    let op = Implicit::new(nodes, dx, dt, cfg.diffusion, d)?;
    let wanted = snapshot_steps(cfg, dt, steps);
    let mut next_snap = 0;
    let mut snapshots = Vec::new();
    let mut clip = Clip { count: 0, worst: 0.0 };
    let mut p = p_init.to_vec();
    let mut rate = 0.0;
    if wanted.first() == Some(&0) {
        snapshots.push(scalar_snapshot(0.0, &p));
        next_snap = 1;
    }
    for step in 1..=steps {
        let mut next: Vec<f64> = p.iter().map(|&v| v + dt * nl.f(v)).collect();
        op.step(&mut next, p_ext);
        rate = 0.0_f64;
        for (new, old) in next.iter_mut().zip(&p) {
            clip.apply(new, 0.0, 1.0);
            rate = rate.max((*new - old).abs() / dt);
        }
        p = next;
        let t = step as f64 * dt;
        let settled = stop_rate.is_some_and(|tol| rate < tol);
        if next_snap < wanted.len() && wanted[next_snap] == step || settled {
            snapshots.push(scalar_snapshot(t, &p));
            next_snap += 1;
        }
        if settled {
            break;
        }
    }
    Ok(Trajectory {
        x,
        snapshots,
        final_rate: rate,
        clipped: clip.count,
        max_excursion: clip.worst,
    })
}

fn scalar_snapshot(t: f64, p: &[f64]) -> Snapshot {
    Snapshot {
        t,
        p: p.to_vec(),
        n_i: None,
        n_u: None,
    }
}

/// Integrates the two-species system on `cfg.grid(env.l)`.
pub fn simulate_system(sys: &SystemConfig, env: &BoundaryEnv, cfg: &SimConfig) -> Result<Trajectory> {
    env.validate()?;
    cfg.validate()?;
    let x = cfg.grid(env.l);
    let nodes = x.len();
    sys.validate(nodes)?;
    let limit = 0.5 / sys.stiffness();
    if cfg.dt > limit {
        return Err(Error::StepTooLarge { dt: cfg.dt, limit });
    }
    let dx = 2.0 * env.l / (nodes - 1) as f64;
    let (steps, dt) = schedule(cfg);
    let op = Implicit::new(nodes, dx, dt, cfg.diffusion, env.d)?;
    let w = &sys.params;
    let wanted = snapshot_steps(cfg, dt, steps);
    let mut next_snap = 0;
    let mut snapshots = Vec::new();
    let mut clip = Clip { count: 0, worst: 0.0 };
    let mut ni = sys.n_i_init.clone();
    let mut nu = sys.n_u_init.clone();
    if wanted.first() == Some(&0) {
        snapshots.push(system_snapshot(0.0, &ni, &nu)?);
        next_snap = 1;
    }
    let mut rate = 0.0;
    for step in 1..=steps {
        let mut next_i = Vec::with_capacity(nodes);
        let mut next_u = Vec::with_capacity(nodes);
        for (j, (&a, &b)) in ni.iter().zip(&nu).enumerate() {
            let total = a + b;
            if total < 1e-300 {
                return Err(Error::DegenerateState {
                    node: j,
                    t: (step - 1) as f64 * dt,
                });
            }
            let (r_i, r_u) = species_rates(w, sys.epsilon, a, b);
            next_i.push(a + dt * r_i);
            next_u.push(b + dt * r_u);
        }
        op.step(&mut next_i, sys.n_i_ext);
        op.step(&mut next_u, sys.n_u_ext);
        rate = 0.0_f64;
        for j in 0..nodes {
            clip.apply(&mut next_i[j], 0.0, f64::INFINITY);
            clip.apply(&mut next_u[j], 0.0, f64::INFINITY);
            rate = rate
                .max((next_i[j] - ni[j]).abs() / dt)
                .max((next_u[j] - nu[j]).abs() / dt);
        }
        ni = next_i;
        nu = next_u;
        if next_snap < wanted.len() && wanted[next_snap] == step {
            snapshots.push(system_snapshot(step as f64 * dt, &ni, &nu)?);
            next_snap += 1;
        }
    }
    Ok(Trajectory {
        x,
        snapshots,
        final_rate: rate,
        clipped: clip.count,
        max_excursion: clip.worst,
    })
}

fn system_snapshot(t: f64, ni: &[f64], nu: &[f64]) -> Result<Snapshot> {
    let mut p = Vec::with_capacity(ni.len());
    for (j, (&a, &b)) in ni.iter().zip(nu).enumerate() {
        if a + b < 1e-300 {
            return Err(Error::DegenerateState { node: j, t });
        }
        p.push(a / (a + b));
    }
    Ok(Snapshot {
        t,
        p,
        n_i: Some(ni.to_vec()),
        n_u: Some(nu.to_vec()),
    })
}

/// Trapezoid-weighted `L²` norm of `a − b` on a uniform grid of spacing `dx`.
pub fn l2_distance(a: &[f64], b: &[f64], dx: f64) -> f64 {
    let n = a.len();
    let sum: f64 = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(j, (u, v))| {
            let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
            w * (u - v).powi(2)
        })
        .sum();
    (sum * dx).sqrt()
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonError {
    pub epsilon: f64,
    pub l2_error: f64,
    pub linf_error: f64,
}

/// Distance at `cfg.t_max` between the system proportion and the scalar
/// solution, for each `ε`. The system step is reduced below its stiffness
/// bound when needed; the scalar run uses `cfg.dt`.
pub fn epsilon_convergence_study(
    model: &ReactionModel,
    params: WolbachiaParams,
    env: &BoundaryEnv,
    p_init: f64,
    cfg: &SimConfig,
    eps_list: &[f64],
) -> Result<Vec<EpsilonError>> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParameter(
            "epsilon list must be nonempty and positive".into(),
        ));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "epsilon list must be strictly decreasing".into(),
        ));
    }
    let nodes = cfg.nodes(env.l);
    let dx = 2.0 * env.l / (nodes - 1) as f64;
    let base = SimConfig {
        snapshot_times: Vec::new(),
        ..cfg.clone()
    };
    let scalar = simulate_scalar(model, env, &vec![p_init; nodes], &base)?;
    let reference = &scalar.last().p;
    eps_list
        .par_iter()
        .map(|&epsilon| {
            let sys = SystemConfig::standard(params, epsilon, env.p_ext, p_init, nodes);
            let run_cfg = SimConfig {
                dt: base.dt.min(0.25 / sys.stiffness()),
                ..base.clone()
            };
            let traj = simulate_system(&sys, env, &run_cfg)?;
            let p = &traj.last().p;
            Ok(EpsilonError {
                epsilon,
                l2_error: l2_distance(p, reference, dx),
                linf_error: sup_distance(p, reference),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Relaxation {
    /// Label of the closest steady state.
    pub label: String,
    pub distance: f64,
    /// All steady states found, in the order `label` refers to.
    #[serde(skip)]
    pub candidates: Vec<SteadyProfile>,
}

/// Integrates until the sup norm of the time derivative drops below `tol`,
/// then reports the nearest steady state in `L²`.
pub fn relax_to_steady(
    model: &ReactionModel,
    env: &BoundaryEnv,
    p_init: &[f64],
    cfg: &SimConfig,
    tol: f64,
) -> Result<(Relaxation, Trajectory)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    env.validate()?;
    let traj = run_scalar(model, env.l, env.d, env.p_ext, p_init, cfg, Some(tol))?;
    if !(traj.final_rate < tol) {
        return Err(Error::NotSettled {
            t: traj.last().t,
            rate: traj.final_rate,
        });
    }
    let nodes = traj.x.len();
    let dx = 2.0 * env.l / (nodes - 1) as f64;
    let candidates = all_steady_states(model, env, nodes)?;
    let field = &traj.last().p;
    let best = candidates
        .iter()
        .map(|c| (c.label.clone(), l2_distance(&c.p, field, dx)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::NoConvergence("no steady state to compare against".into()))?;
    Ok((
        Relaxation {
            label: best.0,
            distance: best.1,
            candidates,
        },
        traj,
    ))
}
