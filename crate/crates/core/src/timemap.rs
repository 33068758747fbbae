//! Phase-plane analysis of the steady-state problem.
//!
//! A steady state has constant energy `(p')²/2 + F(p)`. At a Robin boundary
//! the slope is fixed by the boundary value `q`, so the energy there equals
//! `G(q) = F(q) + D²(q − p_ext)²/2`. The half-length needed to travel from a
//! turning point to `q` is the time map; symmetric decreasing (SD) profiles
//! turn on the upper branch of `F`, symmetric increasing (SI) ones on the lower.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_proportion, Error, Result};
use crate::extended::Extended;
use crate::numerics::{bisect_polish, gauss10, golden_section, integrate, safeguarded_newton, QuadratureOptions};
use crate::reaction::ReactionModel;

/// Length cap used when trimming divergent ends of a time-map domain.
pub const DEFAULT_L_MAX: f64 = 1e3;
/// Sample count for threshold minimization and energy-level scans.
pub const MIN_GRID: usize = 512;
const GOLDEN_TOL: f64 = 1e-10;

/// Domain half-length, migration rate, and exterior proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEnv {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub p_ext: f64,
}

impl BoundaryEnv {
    pub fn new(l: f64, d: f64, p_ext: f64) -> Result<Self> {
        let env = Self { l, d, p_ext };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::InvalidParameter(format!("L must be positive, got {}", self.l)));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::InvalidParameter(format!("D must be positive, got {}", self.d)));
        }
        if !(self.p_ext > 0.0 && self.p_ext < 1.0) {
            return Err(Error::OutOfRange {
                what: "p_ext",
                value: self.p_ext,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(())
    }

    pub fn with_l(self, l: f64) -> Self {
        Self { l, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// Symmetric, decreasing on `(0, L)`.
    SD,
    /// Symmetric, increasing on `(0, L)`.
    SI,
}

/// Monotone branch of `F`: `Upper` on `[θ, 1]`, `Lower` on `[0, θ]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FBranch {
    Upper,
    Lower,
}

/// Interval of boundary values on which a time map is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMapBranch {
    pub branch: Branch,
    pub lo: f64,
    pub hi: f64,
    /// The time map tends to +∞ at this end, which is excluded.
    pub lo_divergent: bool,
    pub hi_divergent: bool,
    pub empty: bool,
}

impl TimeMapBranch {
    pub fn contains(&self, q: f64) -> bool {
        if self.empty {
            return false;
        }
        let above = if self.lo_divergent { q > self.lo } else { q >= self.lo };
        let below = if self.hi_divergent { q < self.hi } else { q <= self.hi };
        above && below
    }
}

/// A threshold length together with the argument achieving it (a boundary
/// value for SM thresholds, an energy level for the non-monotone one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub value: Extended,
    pub argmin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub m_d: Threshold,
    pub m_i: Threshold,
    pub m_star: Threshold,
    pub d_star: Option<f64>,
}

/// Non-monotone orbit families: one interior max and one interior min (`T3`),
/// or a single interior min with unequal boundary values (`T4`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    T3,
    T4,
}

/// A monotone run of a steady orbit between two proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Piece {
    pub from: f64,
    pub to: f64,
    pub from_turning: bool,
    pub to_turning: bool,
    pub length: f64,
}

/// A non-monotone orbit at energy `level`, listed from `x = −L` to `x = L`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Orbit {
    pub family: Family,
    pub level: f64,
    pub pieces: Vec<Piece>,
}

impl Orbit {
    pub fn total_length(&self) -> f64 {
        self.pieces.iter().map(|p| p.length).sum()
    }
}

/// Phase-plane helper bound to one model and environment.
pub(crate) struct Phase<'a> {
    pub model: &'a ReactionModel,
    pub env: BoundaryEnv,
    pub qbar: f64,
    pub g_min: f64,
    pub opts: QuadratureOptions,
}

impl<'a> Phase<'a> {
    pub fn new(model: &'a ReactionModel, env: BoundaryEnv) -> Self {
        Self::with_options(model, env, QuadratureOptions::default())
    }

    pub fn with_options(model: &'a ReactionModel, env: BoundaryEnv, opts: QuadratureOptions) -> Self {
        let qbar = qbar_of(model, &env);
        let mut phase = Self {
            model,
            env,
            qbar,
            g_min: 0.0,
            opts,
        };
        phase.g_min = phase.g(qbar);
        phase
    }

    pub fn g(&self, q: f64) -> f64 {
        let dq = q - self.env.p_ext;
        self.model.big_f(q) + 0.5 * self.env.d * self.env.d * dq * dq
    }

    pub fn dg(&self, q: f64) -> f64 {
        self.model.f(q) + self.env.d * self.env.d * (q - self.env.p_ext)
    }

    pub fn invert(&self, branch: FBranch, y: f64) -> Result<f64> {
        invert_in(self.model, branch, y)
    }

    /// `∫ ds / √(2(level − F(s)))` from anchor `a` to `y`, in the variable
    /// `s = a ± w²` which removes the square-root singularity at a turning anchor.
    pub fn anchored(&self, a: f64, level: f64, turning: bool, y: f64) -> Result<f64> {
        let span = (y - a).abs();
        if span == 0.0 {
            return Ok(0.0);
        }
        let sigma = (y - a).signum();
        let integrand = self.integrand(a, sigma, level, turning);
        Ok(integrate(integrand, 0.0, span.sqrt(), &self.opts)?.value)
    }

    /// Integrand of [`Phase::anchored`] in the variable `w`, where `s = a + sigma·w²`.
    ///
    /// The energy drop `F(a) − F(s)` is integrated directly from `f` so that it
    /// keeps full relative accuracy next to the anchor, where it is tiny.
    pub fn integrand(&self, a: f64, sigma: f64, level: f64, turning: bool) -> impl Fn(f64) -> f64 + '_ {
        let m = self.model;
        let gap = if turning { 0.0 } else { (level - m.big_f(a)).max(0.0) };
        let fa = m.f(a);
        move |w: f64| {
            let t = w * w;
            let drop = -gauss10(|s| m.f(s), a, sigma * t);
            let d = gap + drop;
            if d > 0.0 {
                2.0 * w / (2.0 * d).sqrt()
            } else if gap == 0.0 && -sigma * fa > 0.0 {
                // Rounding pushed a point next to the turning anchor below zero.
                2.0 / (-2.0 * sigma * fa).sqrt()
            } else {
                f64::INFINITY
            }
        }
    }

    /// Travel time between `lo < hi` at a fixed energy, split at θ when it is
    /// interior and otherwise at the midpoint; each half is anchored at its end.
    pub fn arc(&self, lo: f64, hi: f64, level: f64, lo_turning: bool, hi_turning: bool) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let theta = self.model.theta();
        let split = if lo < theta && theta < hi {
            theta
        } else {
            0.5 * (lo + hi)
        };
        Ok(self.anchored(lo, level, lo_turning, split)? + self.anchored(hi, level, hi_turning, split)?)
    }

    /// SD time map: from the upper turning point down to the boundary value `q`.
    pub fn sd(&self, q: f64) -> Result<f64> {
        let level = self.g(q);
        if q == self.env.p_ext && q >= self.model.theta() {
            return Ok(0.0);
        }
        let top = self.invert(FBranch::Upper, level)?;
        if top >= 1.0 {
            return Err(Error::OutOfRange {
                what: "q (SD time map diverges)",
                value: q,
                lo: self.env.p_ext,
                hi: q,
            });
        }
        self.arc(q, top, level, false, true)
    }

    /// SI time map: from the lower turning point up to the boundary value `q`.
    pub fn si(&self, q: f64) -> Result<f64> {
        let level = self.g(q);
        if q == self.env.p_ext && q <= self.model.theta() {
            return Ok(0.0);
        }
        let bottom = self.invert(FBranch::Lower, level)?;
        if bottom <= 0.0 {
            return Err(Error::OutOfRange {
                what: "q (SI time map diverges)",
                value: q,
                lo: q,
                hi: self.env.p_ext,
            });
        }
        self.arc(bottom, q, level, true, false)
    }

    pub fn eval(&self, branch: Branch, q: f64) -> Result<f64> {
        match branch {
            Branch::SD => self.sd(q),
            Branch::SI => self.si(q),
        }
    }

    /// Root of `G = c` on the decreasing part `[0, q̄]`.
    pub fn level_root_left(&self, c: f64) -> Result<f64> {
        if c >= self.g(0.0) {
            return Ok(0.0);
        }
        bisect_polish(|q| self.g(q) - c, |q| self.dg(q), 0.0, self.qbar, 1e-15)
    }

    /// Root of `G = c` on the increasing part `[q̄, 1]`.
    pub fn level_root_right(&self, c: f64) -> Result<f64> {
        if c >= self.g(1.0) {
            return Ok(1.0);
        }
        bisect_polish(|q| self.g(q) - c, |q| self.dg(q), self.qbar, 1.0, 1e-15)
    }

    pub fn domain(&self, branch: Branch) -> Result<TimeMapBranch> {
        let p_ext = self.env.p_ext;
        let f_one = self.model.landmarks().f_one;
        match branch {
            Branch::SD => {
                let start = p_ext.max(self.qbar);
                let p_star = bisect_polish(|q| self.g(q) - f_one, |q| self.dg(q), start, 1.0, 1e-15)?;
                Ok(TimeMapBranch {
                    branch,
                    lo: p_ext,
                    hi: p_star,
                    lo_divergent: false,
                    hi_divergent: true,
                    empty: false,
                })
            }
            Branch::SI => {
                let low = p_ext.min(self.qbar);
                if self.g(low) >= 0.0 {
                    return Ok(TimeMapBranch {
                        branch,
                        lo: low,
                        hi: low,
                        lo_divergent: true,
                        hi_divergent: true,
                        empty: true,
                    });
                }
                let lo = bisect_polish(|q| self.g(q), |q| self.dg(q), 0.0, low, 1e-15)?;
                let (hi, hi_divergent) = if self.g(p_ext) < 0.0 {
                    (p_ext, false)
                } else {
                    (bisect_polish(|q| self.g(q), |q| self.dg(q), low, p_ext, 1e-15)?, true)
                };
                Ok(TimeMapBranch {
                    branch,
                    lo,
                    hi,
                    lo_divergent: true,
                    hi_divergent,
                    empty: false,
                })
            }
        }
    }

    /// Pulls each divergent end inward geometrically until the time map
    /// exceeds `l_max` or the step reaches the resolution floor.
    pub fn trimmed(&self, dom: &TimeMapBranch, l_max: f64) -> (f64, f64) {
        let width = dom.hi - dom.lo;
        let pull = |end: f64, inward: f64| -> f64 {
            let floor = 1e-13 * end.abs().max(1e-3);
            let mut delta = 1e-3 * width;
            let mut best = end + inward * delta;
            while delta >= floor {
                let q = end + inward * delta;
                match self.eval(dom.branch, q) {
                    Ok(t) if t.is_finite() => {
                        best = q;
                        if t >= l_max {
                            break;
                        }
                    }
                    _ => break,
                }
                delta *= 0.1;
            }
            best
        };
        let lo = if dom.lo_divergent { pull(dom.lo, 1.0) } else { dom.lo };
        let hi = if dom.hi_divergent { pull(dom.hi, -1.0) } else { dom.hi };
        (lo, hi)
    }

    /// The admissible energy band of the non-monotone family for this
    /// environment, or `None` when the family does not exist.
    pub fn family_band(&self) -> Option<(Family, f64, f64)> {
        let lm = self.model.landmarks();
        let p_ext = self.env.p_ext;
        let eps = 1e-12 * lm.f_theta.abs();
        if p_ext < lm.beta {
            let lo = self.model.big_f(p_ext).max(lm.f_theta + eps).max(self.g_min + eps);
            let hi = -eps;
            (lo < hi).then_some((Family::T3, lo, hi))
        } else if p_ext > lm.beta && self.g_min < 0.0 {
            let lo = (lm.f_theta + eps).max(self.g_min + eps);
            let hi = -eps;
            (lo < hi).then_some((Family::T4, lo, hi))
        } else {
            None
        }
    }

    /// Builds the orbit of `family` at energy `c`, oriented so that it
    /// leaves `x = −L` moving away from `p_ext`.
    pub fn orbit(&self, family: Family, c: f64) -> Result<Orbit> {
        let bottom = self.invert(FBranch::Lower, c)?;
        let left = self.level_root_left(c)?;
        let right = self.level_root_right(c)?;
        let pieces = match family {
            Family::T3 => {
                let top = self.invert(FBranch::Upper, c)?;
                // Boundary values: `right` ≥ p_ext climbs first, `left` ≤ p_ext is reached last.
                vec![
                    Piece {
                        from: right,
                        to: top,
                        from_turning: false,
                        to_turning: true,
                        length: self.arc(right.min(top), top.max(right), c, false, true)?,
                    },
                    Piece {
                        from: top,
                        to: bottom,
                        from_turning: true,
                        to_turning: true,
                        length: self.arc(bottom, top, c, true, true)?,
                    },
                    Piece {
                        from: bottom,
                        to: left,
                        from_turning: true,
                        to_turning: false,
                        length: self.arc(bottom, left.max(bottom), c, true, false)?,
                    },
                ]
            }
            Family::T4 => vec![
                Piece {
                    from: left,
                    to: bottom,
                    from_turning: false,
                    to_turning: true,
                    length: self.arc(bottom, left.max(bottom), c, true, false)?,
                },
                Piece {
                    from: bottom,
                    to: right,
                    from_turning: true,
                    to_turning: false,
                    length: self.arc(bottom, right.max(bottom), c, true, false)?,
                },
            ],
        };
        Ok(Orbit {
            family,
            level: c,
            pieces,
        })
    }
}

fn qbar_of(model: &ReactionModel, env: &BoundaryEnv) -> f64 {
    let theta = model.theta();
    let p_ext = env.p_ext;
    if p_ext == theta {
        return theta;
    }
    let d2 = env.d * env.d;
    let (lo, hi) = if p_ext < theta { (p_ext, theta) } else { (theta, p_ext) };
    bisect_polish(|q| model.f(q) + d2 * (q - p_ext), |q| model.df(q) + d2, lo, hi, 1e-15)
        .expect("G' changes sign between p_ext and theta")
}

fn invert_in(model: &ReactionModel, branch: FBranch, y: f64) -> Result<f64> {
    let lm = model.landmarks();
    let slack = 1e-14;
    let (lo, hi, y_lo, y_hi) = match branch {
        FBranch::Upper => (lm.theta, 1.0, lm.f_theta, lm.f_one),
        FBranch::Lower => (0.0, lm.theta, lm.f_theta, lm.f_zero),
    };
    if !(y >= y_lo - slack && y <= y_hi + slack) {
        return Err(Error::OutOfRange {
            what: "potential level",
            value: y,
            lo: y_lo,
            hi: y_hi,
        });
    }
    if y <= y_lo {
        return Ok(lm.theta);
    }
    if y >= y_hi {
        return Ok(match branch {
            FBranch::Upper => 1.0,
            FBranch::Lower => 0.0,
        });
    }
    let guess = match branch {
        FBranch::Upper => lo + (hi - lo) * (y - y_lo) / (y_hi - y_lo),
        FBranch::Lower => hi - (hi - lo) * (y - y_lo) / (y_hi - y_lo),
    };
    safeguarded_newton(|s| (model.big_f(s) - y, model.f(s)), lo, hi, guess, 1e-16)
}

/// Evaluates `G(q) = F(q) + D²(q − p_ext)²/2`.
pub fn potential_g(model: &ReactionModel, env: &BoundaryEnv, q: f64) -> Result<f64> {
    check_proportion("q", q)?;
    let dq = q - env.p_ext;
    Ok(model.big_f(q) + 0.5 * env.d * env.d * dq * dq)
}

/// The unique minimizer of `G` on `[0, 1]`, lying between `p_ext` and θ.
pub fn minimizer_qbar(model: &ReactionModel, env: &BoundaryEnv) -> f64 {
    qbar_of(model, env)
}

/// Inverse of `F` restricted to the upper (`[θ, 1]`) or lower (`[0, θ]`) branch.
pub fn invert_f(model: &ReactionModel, branch: FBranch, y: f64) -> Result<f64> {
    invert_in(model, branch, y)
}

/// Maximal interval of boundary values on which the branch time map is defined.
pub fn time_map_domain(model: &ReactionModel, env: &BoundaryEnv, branch: Branch) -> Result<TimeMapBranch> {
    Phase::new(model, *env).domain(branch)
}

/// The half-length of the SD or SI steady state with boundary value `q`.
pub fn time_map(model: &ReactionModel, env: &BoundaryEnv, branch: Branch, q: f64) -> Result<f64> {
    time_map_with(model, env, branch, q, &QuadratureOptions::default())
}

/// [`time_map`] with explicit quadrature tolerances.
pub fn time_map_with(
    model: &ReactionModel,
    env: &BoundaryEnv,
    branch: Branch,
    q: f64,
    opts: &QuadratureOptions,
) -> Result<f64> {
    let phase = Phase::with_options(model, *env, *opts);
    let dom = phase.domain(branch)?;
    if !dom.contains(q) {
        return Err(Error::OutOfRange {
            what: "q (outside time-map domain)",
            value: q,
            lo: dom.lo,
            hi: dom.hi,
        });
    }
    phase.eval(branch, q)
}

/// The migration rate above which no SI steady state exists, defined only
/// when `p_ext > β`.
pub fn critical_diffusion_dstar(model: &ReactionModel, p_ext: f64) -> Result<Option<f64>> {
    if !(p_ext > 0.0 && p_ext < 1.0) {
        return Err(Error::OutOfRange {
            what: "p_ext",
            value: p_ext,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let lm = model.landmarks();
    if p_ext <= lm.beta {
        return Ok(None);
    }
    let h = |q: f64| model.big_f(q) + 0.5 * model.f(q) * (p_ext - q);
    let dh = |q: f64| 0.5 * model.f(q) + 0.5 * model.df(q) * (p_ext - q);
    let root = bisect_polish(h, dh, lm.theta, p_ext, 1e-15)?;
    Ok(Some((model.f(root) / (p_ext - root)).sqrt()))
}

/// Like [`critical_diffusion_dstar`], also returning the point where `G` touches zero.
pub fn critical_diffusion_point(model: &ReactionModel, p_ext: f64) -> Result<Option<(f64, f64)>> {
    let lm = model.landmarks();
    let Some(d) = critical_diffusion_dstar(model, p_ext)? else {
        return Ok(None);
    };
    let h = |q: f64| model.big_f(q) + 0.5 * model.f(q) * (p_ext - q);
    let root = crate::numerics::bisect(h, lm.theta, p_ext, 1e-15)?;
    Ok(Some((d, root)))
}

/// Minimal half-length admitting an SD (or SI) steady state.
pub fn monotone_threshold(model: &ReactionModel, env: &BoundaryEnv, branch: Branch) -> Result<Threshold> {
    monotone_threshold_in(&Phase::new(model, *env), branch, DEFAULT_L_MAX)
}

pub(crate) fn monotone_threshold_in(phase: &Phase, branch: Branch, l_max: f64) -> Result<Threshold> {
    let theta = phase.model.theta();
    let p_ext = phase.env.p_ext;
    let zero = match branch {
        Branch::SD => p_ext >= theta,
        Branch::SI => p_ext <= theta,
    };
    if zero {
        return Ok(Threshold {
            value: Extended::Zero,
            argmin: Some(p_ext),
        });
    }
    let dom = phase.domain(branch)?;
    if dom.empty {
        return Ok(Threshold {
            value: Extended::Infinite,
            argmin: None,
        });
    }
    let (lo, hi) = phase.trimmed(&dom, l_max);
    let samples = sample_parallel(lo, hi, MIN_GRID, |q| phase.eval(branch, q).unwrap_or(f64::NAN));
    let (q, v) = refine_min(&samples, |q| phase.eval(branch, q).unwrap_or(f64::NAN), GOLDEN_TOL)
        .ok_or_else(|| Error::NoConvergence("time-map minimization".into()))?;
    Ok(Threshold {
        value: if v > 0.0 { Extended::Finite(v) } else { Extended::Zero },
        argmin: Some(q),
    })
}

/// Minimal half-length admitting a steady state that is not symmetric-monotone,
/// searched over the one-max-one-min family when `p_ext < β` and the
/// single-min asymmetric family when `p_ext > β`. `argmin` is the energy level.
pub fn nonmonotone_threshold_mstar(model: &ReactionModel, env: &BoundaryEnv) -> Result<Threshold> {
    nonmonotone_threshold_in(&Phase::new(model, *env))
}

pub(crate) fn nonmonotone_threshold_in(phase: &Phase) -> Result<Threshold> {
    let Some((family, lo, hi)) = phase.family_band() else {
        return Ok(Threshold {
            value: Extended::Infinite,
            argmin: None,
        });
    };
    let half = |c: f64| {
        phase
            .orbit(family, c)
            .map(|o| 0.5 * o.total_length())
            .unwrap_or(f64::NAN)
    };
    let samples = sample_parallel(lo, hi, MIN_GRID, half);
    let (c, v) = refine_min(&samples, half, GOLDEN_TOL * (hi - lo))
        .ok_or_else(|| Error::NoConvergence("non-monotone threshold minimization".into()))?;
    Ok(Threshold {
        value: Extended::Finite(v),
        argmin: Some(c),
    })
}

/// All thresholds for one environment (`env.l` is ignored).
pub fn thresholds(model: &ReactionModel, env: &BoundaryEnv) -> Result<ThresholdReport> {
    let phase = Phase::new(model, *env);
    Ok(ThresholdReport {
        m_d: monotone_threshold_in(&phase, Branch::SD, DEFAULT_L_MAX)?,
        m_i: monotone_threshold_in(&phase, Branch::SI, DEFAULT_L_MAX)?,
        m_star: nonmonotone_threshold_in(&phase)?,
        d_star: critical_diffusion_dstar(model, env.p_ext)?,
    })
}

/// Evaluates `f` on `n` equispaced points of `[lo, hi]` (ends included).
pub(crate) fn sample_parallel<F>(lo: f64, hi: f64, n: usize, f: F) -> Vec<(f64, f64)>
where
    F: Fn(f64) -> f64 + Sync,
{
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let x = if i == n - 1 { hi } else { lo + i as f64 * h };
            (x, f(x))
        })
        .collect()
}

/// Golden-section refinement around the smallest finite sample.
fn refine_min<F: Fn(f64) -> f64>(samples: &[(f64, f64)], f: F, tol: f64) -> Option<(f64, f64)> {
    let (i, &(x0, v0)) = samples
        .iter()
        .enumerate()
        .filter(|(_, (_, v))| v.is_finite())
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    let a = samples[i.saturating_sub(1)].0;
    let b = samples[(i + 1).min(samples.len() - 1)].0;
    let (x, v) = golden_section(
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
        tol,
    );
    Some(if v <= v0 { (x, v) } else { (x0, v0) })
}
