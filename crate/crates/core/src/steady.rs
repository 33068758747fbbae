//! Steady states: boundary values from the time-map equation, full profiles
//! reconstructed from the energy integral, and residual checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bisect, golden_section, integrate, safeguarded_newton, QuadratureOptions};
use crate::reaction::ReactionModel;
use crate::timemap::{BoundaryEnv, Branch, FBranch, Family, Orbit, Phase, Piece, DEFAULT_L_MAX, MIN_GRID};

pub const DEFAULT_N_GRID: usize = 1001;
/// Sample count for the sign-change scan of `time_map(q) − L`.
pub const ROOT_SCAN: usize = 4096;
/// Roots closer than this are reported once.
pub const ROOT_MERGE: f64 = 1e-8;
/// Largest accepted `|time_map(q) − L|` for a boundary value.
pub const ROOT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileClass {
    SD,
    SI,
    NonSM,
    Constant,
}

impl ProfileClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileClass::SD => "SD",
            ProfileClass::SI => "SI",
            ProfileClass::NonSM => "nonSM",
            ProfileClass::Constant => "constant",
        }
    }
}

impl From<Branch> for ProfileClass {
    fn from(b: Branch) -> Self {
        match b {
            Branch::SD => ProfileClass::SD,
            Branch::SI => ProfileClass::SI,
        }
    }
}

/// A steady state sampled on a uniform grid of `[−L, L]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyProfile {
    pub class: ProfileClass,
    pub label: String,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// Exact slope `p'(x)` from the energy relation.
    pub dp: Vec<f64>,
    pub p_at_0: f64,
    pub p_at_l: f64,
    pub p_at_minus_l: f64,
    /// The conserved value of `(p')²/2 + F(p)`.
    pub energy: f64,
    pub family: Option<Family>,
}

impl SteadyProfile {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }
}

/// Boundary values solving `time_map(q) = L`, plus whether the constant
/// state `p ≡ θ` exists (it does exactly when `p_ext = θ`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryRoots {
    pub roots: Vec<f64>,
    pub constant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// `max |Δ²p/Δx² + f(p)|` over interior nodes.
    pub interior: f64,
    pub bc_left: f64,
    pub bc_right: f64,
    pub energy_drift: f64,
}

impl Residuals {
    pub fn boundary(&self) -> f64 {
        self.bc_left.max(self.bc_right)
    }
}

/// Time-map samples for one branch, reusable across many values of `L`.
pub struct BranchTable<'a> {
    phase: Phase<'a>,
    branch: Branch,
    samples: Vec<(f64, f64)>,
}

impl<'a> BranchTable<'a> {
    /// Samples the branch time map. `env.l` is not used.
    pub fn new(model: &'a ReactionModel, env: BoundaryEnv, branch: Branch) -> Result<Self> {
        let phase = Phase::new(model, env);
        let dom = phase.domain(branch)?;
        let samples = if dom.empty {
            Vec::new()
        } else {
            let (lo, hi) = phase.trimmed(&dom, DEFAULT_L_MAX);
            let mut qs = uniform(lo, hi, ROOT_SCAN);
            if dom.lo_divergent {
                qs.extend(geometric(dom.lo, lo, (hi - lo) / ROOT_SCAN as f64, 1.0));
            }
            if dom.hi_divergent {
                qs.extend(geometric(dom.hi, hi, (hi - lo) / ROOT_SCAN as f64, -1.0));
            }
            qs.sort_by(f64::total_cmp);
            qs.dedup();
            qs.into_par_iter()
                .map(|q| (q, phase.eval(branch, q).unwrap_or(f64::NAN)))
                .filter(|(_, t)| t.is_finite())
                .collect()
        };
        Ok(Self { phase, branch, samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Every `q` with `time_map(q) = l`, sorted, with near-duplicates merged.
    pub fn roots(&self, l: f64) -> Vec<f64> {
        let eval = |q: f64| self.phase.eval(self.branch, q).map(|t| t - l).unwrap_or(f64::NAN);
        level_crossings(&self.samples, l, eval)
    }
}

/// Finds all crossings of `samples` with level `l` and refines them with `eval`
/// (which must return the sampled function minus `l`). Grid-level extrema
/// lying within reach of `l` are refined too, so a pair of close roots, or a
/// tangency, inside one cell is not missed.
fn level_crossings<F: Fn(f64) -> f64>(samples: &[(f64, f64)], l: f64, eval: F) -> Vec<f64> {
    let mut roots = Vec::new();
    let n = samples.len();
    for k in 0..n.saturating_sub(1) {
        let (a, ta) = samples[k];
        let (b, tb) = samples[k + 1];
        if ta == l {
            roots.push(a);
        }
        if (ta - l) * (tb - l) < 0.0 {
            if let Ok(r) = bisect(&eval, a, b, 0.0) {
                roots.push(r);
            }
        }
    }
    if let Some(&(q, t)) = samples.last() {
        if t == l {
            roots.push(q);
        }
    }
    for k in 1..n.saturating_sub(1) {
        let (t_prev, t, t_next) = (samples[k - 1].1, samples[k].1, samples[k + 1].1);
        let is_min = t <= t_prev && t <= t_next && t > l;
        let is_max = t >= t_prev && t >= t_next && t < l;
        if !(is_min || is_max) {
            continue;
        }
        let (a, b) = (samples[k - 1].0, samples[k + 1].0);
        let sign = if is_min { 1.0 } else { -1.0 };
        let (x, v) = golden_section(|q| sign * eval(q), a, b, 1e-14 * (b - a).max(1e-300));
        let v = sign * v;
        if v.abs() <= ROOT_TOL {
            roots.push(x);
        } else if sign * v < 0.0 {
            for (lo, hi) in [(a, x), (x, b)] {
                if let Ok(r) = bisect(&eval, lo, hi, 0.0) {
                    roots.push(r);
                }
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|later, earlier| (*later - *earlier).abs() < ROOT_MERGE);
    roots
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * h })
        .collect()
}

/// Points approaching a divergent end `end` from `near` out to `far_step`
/// away, spaced geometrically.
fn geometric(end: f64, near: f64, far_step: f64, inward: f64) -> Vec<f64> {
    let d_min = (near - end).abs();
    let d_max = far_step.max(d_min);
    if d_max <= d_min {
        return Vec::new();
    }
    let count = 64;
    let ratio = (d_max / d_min).ln() / count as f64;
    (0..=count)
        .map(|k| end + inward * d_min * (ratio * k as f64).exp())
        .collect()
}

/// Boundary values `q` with `time_map(q) = L` on the given branch.
pub fn solve_boundary_values(model: &ReactionModel, env: &BoundaryEnv, branch: Branch) -> Result<BoundaryRoots> {
    let table = BranchTable::new(model, *env, branch)?;
    Ok(BoundaryRoots {
        roots: table.roots(env.l),
        constant: env.p_ext == model.theta(),
    })
}

/// Symmetric uniform grid on `[−L, L]` with `x[j] = −x[n−1−j]` exactly.
pub fn symmetric_grid(l: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * l / (n - 1) as f64;
    let mut x = vec![0.0; n];
    for j in 0..n / 2 {
        let v = -l + j as f64 * h;
        x[j] = v;
        x[n - 1 - j] = -v;
    }
    x
}

/// Position along one monotone piece of an orbit.
struct PieceSolver<'p, 'a> {
    phase: &'p Phase<'a>,
    piece: Piece,
    level: f64,
    split: f64,
    head: f64,
}

impl<'p, 'a> PieceSolver<'p, 'a> {
    fn new(phase: &'p Phase<'a>, piece: Piece, level: f64) -> Result<Self> {
        let (lo, hi) = if piece.from <= piece.to {
            (piece.from, piece.to)
        } else {
            (piece.to, piece.from)
        };
        let theta = phase.model.theta();
        let split = if lo < theta && theta < hi {
            theta
        } else {
            0.5 * (lo + hi)
        };
        let head = phase.anchored(piece.from, level, piece.from_turning, split)?;
        Ok(Self {
            phase,
            piece,
            level,
            split,
            head,
        })
    }

    fn total(&self) -> Result<f64> {
        Ok(self.head
            + self
                .phase
                .anchored(self.piece.to, self.level, self.piece.to_turning, self.split)?)
    }

    /// The proportion reached after travelling `d` from the start of the piece,
    /// where the piece is `total` long.
    fn at(&self, d: f64, total: f64) -> Result<f64> {
        let d = d.clamp(0.0, total);
        if d <= self.head {
            self.solve_from(self.piece.from, self.piece.from_turning, d, self.head)
        } else {
            self.solve_from(self.piece.to, self.piece.to_turning, total - d, total - self.head)
        }
    }

    // Travel `d` from `anchor` toward the split; `reach` is the travel time to the split.
    fn solve_from(&self, anchor: f64, turning: bool, d: f64, reach: f64) -> Result<f64> {
        if d <= 0.0 {
            return Ok(anchor);
        }
        let sigma = (self.split - anchor).signum();
        let w_max = (self.split - anchor).abs().sqrt();
        if d >= reach {
            return Ok(self.split);
        }
        let integrand = self.phase.integrand(anchor, sigma, self.level, turning);
        let opts = self.phase.opts;
        let failure = std::cell::Cell::new(None);
        let w = safeguarded_newton(
            |w| match integrate(&integrand, 0.0, w, &opts) {
                Ok(x) => (x.value - d, integrand(w)),
                Err(e) => {
                    failure.set(Some(e));
                    // Stop the iteration: a zero residual ends it immediately.
                    (0.0, 1.0)
                }
            },
            0.0,
            w_max,
            w_max * d / reach,
            1e-15 * w_max,
        )?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(anchor + sigma * w * w)
    }
}

fn slope(model: &ReactionModel, level: f64, p: f64, dir: f64) -> f64 {
    dir * (2.0 * (level - model.big_f(p))).max(0.0).sqrt()
}

/// Samples a sequence of pieces of total length `span` on grid positions
/// measured from the start of the first piece; returns values and slopes.
fn sample_pieces(
    phase: &Phase,
    pieces: &[Piece],
    level: f64,
    offsets: &[f64],
    span: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let solvers = pieces
        .iter()
        .map(|&pc| PieceSolver::new(phase, pc, level))
        .collect::<Result<Vec<_>>>()?;
    let totals = solvers.iter().map(|s| s.total()).collect::<Result<Vec<_>>>()?;
    let whole: f64 = totals.iter().sum();
    // Stretch so the last piece ends exactly at `span`.
    let scale = if whole > 0.0 { whole / span } else { 0.0 };
    let results: Vec<Result<(f64, f64)>> = offsets
        .par_iter()
        .map(|&x| {
            let mut d = x * scale;
            for (k, s) in solvers.iter().enumerate() {
                let last = k + 1 == solvers.len();
                if d <= totals[k] || last {
                    let p = s.at(d, totals[k])?;
                    let dir = (s.piece.to - s.piece.from).signum();
                    return Ok((p, slope(phase.model, level, p, dir)));
                }
                d -= totals[k];
            }
            unreachable!("at least one piece")
        })
        .collect();
    let mut p = Vec::with_capacity(offsets.len());
    let mut dp = Vec::with_capacity(offsets.len());
    for r in results {
        let (a, b) = r?;
        p.push(a);
        dp.push(b);
    }
    Ok((p, dp))
}

fn reconstruction_phase(model: &ReactionModel, env: BoundaryEnv) -> Phase<'_> {
    Phase::with_options(
        model,
        env,
        QuadratureOptions {
            abs_tol: 1e-11,
            rel_tol: 1e-13,
            max_intervals: 400,
        },
    )
}

/// Change of the time map across the neighbouring floats of `q`. Next to a
/// divergent end the map is so steep that this exceeds the root tolerance,
/// and `q` is then as good a root as `f64` can hold.
fn ulp_sensitivity(phase: &Phase, branch: Branch, q: f64, length: f64) -> f64 {
    [q.next_down(), q.next_up()]
        .into_iter()
        .filter_map(|n| phase.eval(branch, n).ok())
        .map(|t| (t - length).abs())
        .fold(0.0, f64::max)
}

/// Rebuilds the symmetric profile whose boundary value `p_at_l` solves the
/// branch equation for `env.l`.
pub fn reconstruct_profile(
    model: &ReactionModel,
    env: &BoundaryEnv,
    branch: Branch,
    p_at_l: f64,
    n_grid: usize,
) -> Result<SteadyProfile> {
    if n_grid < 3 {
        return Err(Error::InvalidParameter(format!(
            "n_grid must be at least 3, got {n_grid}"
        )));
    }
    let phase = reconstruction_phase(model, *env);
    let length = phase.eval(branch, p_at_l)?;
    let residual = (length - env.l).abs();
    if !(residual <= ROOT_TOL.max(1e-10 * env.l))
        && !(residual <= 2.0 * ulp_sensitivity(&phase, branch, p_at_l, length))
    {
        return Err(Error::NotABoundaryRoot { q: p_at_l, residual });
    }
    let level = phase.g(p_at_l);
    let (turn, fb) = match branch {
        Branch::SD => (phase.invert(FBranch::Upper, level)?, FBranch::Upper),
        Branch::SI => (phase.invert(FBranch::Lower, level)?, FBranch::Lower),
    };
    debug_assert!(matches!(fb, FBranch::Upper | FBranch::Lower));
    let piece = Piece {
        from: turn,
        to: p_at_l,
        from_turning: true,
        to_turning: false,
        length,
    };
    let x = symmetric_grid(env.l, n_grid);
    let half: Vec<f64> = x[n_grid / 2..].to_vec();
    let (p_half, dp_half) = sample_pieces(&phase, &[piece], level, &half, env.l)?;
    let mut p = vec![0.0; n_grid];
    let mut dp = vec![0.0; n_grid];
    let offset = n_grid / 2;
    for (k, (&v, &s)) in p_half.iter().zip(&dp_half).enumerate() {
        p[offset + k] = v;
        dp[offset + k] = s;
        p[n_grid - 1 - offset - k] = v;
        dp[n_grid - 1 - offset - k] = -s;
    }
    // The endpoint values are known exactly.
    p[0] = p_at_l;
    p[n_grid - 1] = p_at_l;
    Ok(SteadyProfile {
        class: branch.into(),
        label: String::new(),
        x,
        p,
        dp,
        p_at_0: turn,
        p_at_l,
        p_at_minus_l: p_at_l,
        energy: level,
        family: None,
    })
}

/// The constant state `p ≡ θ`, a steady state exactly when `p_ext = θ`.
pub fn constant_profile(model: &ReactionModel, env: &BoundaryEnv, n_grid: usize) -> SteadyProfile {
    let theta = model.theta();
    SteadyProfile {
        class: ProfileClass::Constant,
        label: "constant".into(),
        x: symmetric_grid(env.l, n_grid),
        p: vec![theta; n_grid],
        dp: vec![0.0; n_grid],
        p_at_0: theta,
        p_at_l: theta,
        p_at_minus_l: theta,
        energy: model.big_f(theta),
        family: None,
    }
}

fn orbit_profile(phase: &Phase, orbit: &Orbit, n_grid: usize, label: String) -> Result<SteadyProfile> {
    let l = phase.env.l;
    let x = symmetric_grid(l, n_grid);
    let offsets: Vec<f64> = x.iter().map(|&v| v + l).collect();
    let (mut p, dp) = sample_pieces(phase, &orbit.pieces, orbit.level, &offsets, 2.0 * l)?;
    let (mid, _) = sample_pieces(phase, &orbit.pieces, orbit.level, &[l], 2.0 * l)?;
    let first = orbit.pieces.first().expect("orbit has pieces");
    let last = orbit.pieces.last().expect("orbit has pieces");
    p[0] = first.from;
    p[n_grid - 1] = last.to;
    Ok(SteadyProfile {
        class: ProfileClass::NonSM,
        label,
        x,
        p,
        dp,
        p_at_0: mid[0],
        p_at_l: last.to,
        p_at_minus_l: first.from,
        energy: orbit.level,
        family: Some(orbit.family),
    })
}

fn mirrored(profile: &SteadyProfile, label: String) -> SteadyProfile {
    let mut out = profile.clone();
    out.p.reverse();
    out.dp.reverse();
    for v in &mut out.dp {
        *v = -*v;
    }
    out.p_at_l = profile.p_at_minus_l;
    out.p_at_minus_l = profile.p_at_l;
    out.label = label;
    out
}

/// Energy levels at which the non-monotone family has half-length `env.l`.
pub fn non_monotone_levels(model: &ReactionModel, env: &BoundaryEnv) -> Result<Vec<(Family, f64)>> {
    let phase = Phase::new(model, *env);
    let Some((family, lo, hi)) = phase.family_band() else {
        return Ok(Vec::new());
    };
    let half = |c: f64| {
        phase
            .orbit(family, c)
            .map(|o| 0.5 * o.total_length())
            .unwrap_or(f64::NAN)
    };
    // The half-length grows without bound as the level approaches zero.
    let mut cs = uniform(lo, hi, MIN_GRID);
    cs.extend(geometric(0.0, hi, (hi - lo) / MIN_GRID as f64, -1.0));
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    let samples: Vec<(f64, f64)> = cs
        .into_par_iter()
        .map(|c| (c, half(c)))
        .filter(|(_, t)| t.is_finite())
        .collect();
    let l = env.l;
    let roots = level_crossings(&samples, l, |c| half(c) - l);
    // Level tolerance is relative to the band, not absolute.
    let mut merged: Vec<f64> = Vec::new();
    for c in roots {
        if merged.last().is_none_or(|&m| (c - m).abs() > 1e-8 * (hi - lo)) {
            merged.push(c);
        }
    }
    Ok(merged.into_iter().map(|c| (family, c)).collect())
}

/// Non-monotone steady states of half-length `env.l`, both orientations of each.
pub fn construct_non_monotone(model: &ReactionModel, env: &BoundaryEnv, n_grid: usize) -> Result<Vec<SteadyProfile>> {
    let levels = non_monotone_levels(model, env)?;
    let phase = reconstruction_phase(model, *env);
    let mut out = Vec::new();
    for (k, (family, c)) in levels.into_iter().enumerate() {
        let orbit = phase.orbit(family, c)?;
        let tag = match family {
            Family::T3 => "T3",
            Family::T4 => "T4",
        };
        let a = orbit_profile(&phase, &orbit, n_grid, format!("nonSM-{tag}-{}a", k + 1))?;
        let b = mirrored(&a, format!("nonSM-{tag}-{}b", k + 1));
        out.push(a);
        out.push(b);
    }
    Ok(out)
}

/// Every steady state found for `env`: SD, SI, the constant state when it
/// exists, and the non-monotone family.
pub fn all_steady_states(model: &ReactionModel, env: &BoundaryEnv, n_grid: usize) -> Result<Vec<SteadyProfile>> {
    let mut out = Vec::new();
    for branch in [Branch::SD, Branch::SI] {
        let roots = solve_boundary_values(model, env, branch)?;
        for (k, q) in roots.roots.iter().enumerate() {
            let mut profile = reconstruct_profile(model, env, branch, *q, n_grid)?;
            profile.label = format!("{}-{}", ProfileClass::from(branch).as_str(), k + 1);
            out.push(profile);
        }
    }
    if env.p_ext == model.theta() {
        out.push(constant_profile(model, env, n_grid));
    }
    out.extend(construct_non_monotone(model, env, n_grid)?);
    Ok(out)
}

/// Checks a sampled profile against the differential equation, the Robin
/// conditions, and conservation of energy.
pub fn profile_residual(model: &ReactionModel, env: &BoundaryEnv, profile: &SteadyProfile) -> Result<Residuals> {
    let x = &profile.x;
    let p = &profile.p;
    let n = x.len();
    if n < 3 || p.len() != n {
        return Err(Error::InvalidParameter(
            "profile needs at least 3 matching samples".into(),
        ));
    }
    let h = (x[n - 1] - x[0]) / (n - 1) as f64;
    if x.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs()) || h <= 0.0 {
        return Err(Error::NonUniformGrid);
    }
    let interior = (1..n - 1)
        .map(|j| ((p[j + 1] - 2.0 * p[j] + p[j - 1]) / (h * h) + model.f(p[j])).abs())
        .fold(0.0, f64::max);
    let slope_left = (-3.0 * p[0] + 4.0 * p[1] - p[2]) / (2.0 * h);
    let slope_right = (3.0 * p[n - 1] - 4.0 * p[n - 2] + p[n - 3]) / (2.0 * h);
    let bc_left = (-slope_left + env.d * (p[0] - env.p_ext)).abs();
    let bc_right = (slope_right + env.d * (p[n - 1] - env.p_ext)).abs();
    let (lo, hi) = profile
        .p
        .iter()
        .zip(&profile.dp)
        .map(|(&v, &s)| 0.5 * s * s + model.big_f(v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| (a.min(e), b.max(e)));
    Ok(Residuals {
        interior,
        bc_left,
        bc_right,
        energy_drift: hi - lo,
    })
}
