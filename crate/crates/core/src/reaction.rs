//! The bistable reaction term: the Wolbachia rational form and a cubic test
//! model, with derivatives, the antiderivative `F`, and the landmark roots.

use serde::{Deserialize, Serialize};

use crate::error::{check_proportion, Error, Result};
use crate::numerics::{bisect_polish, integrate, Chebyshev, QuadratureOptions};

/// Anything that supplies a reaction value and its derivative.
///
/// The stability oracle and the scalar PDE only need these two, which lets
/// tests swap in stubs such as `f ≡ 0`.
pub trait Nonlinearity: Sync {
    fn f(&self, p: f64) -> f64;
    fn df(&self, p: f64) -> f64;
}

/// Life-history parameters of the infected/uninfected mosquito model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WolbachiaParams {
    /// Birth rate of uninfected mosquitoes (1/day).
    pub b_u: f64,
    /// Death rate of uninfected mosquitoes (1/day).
    pub d_u: f64,
    /// Lifespan reduction factor of infected mosquitoes.
    pub delta: f64,
    /// Fecundity decrease of infected females.
    pub s_f: f64,
    /// Fraction of eggs that fail to hatch under cytoplasmic incompatibility.
    pub s_h: f64,
    /// Carrying capacity.
    #[serde(rename = "K")]
    pub k: f64,
}

impl WolbachiaParams {
    /// The parameter set used for the numerical illustrations (`K` is not
    /// part of that set and defaults to 1).
    pub fn table1() -> Self {
        Self {
            b_u: 1.12,
            d_u: 0.27,
            delta: 10.0 / 9.0,
            s_f: 0.1,
            s_h: 0.8,
            k: 1.0,
        }
    }

    /// The unstable interior zero of the reaction term.
    pub fn theta(&self) -> f64 {
        (self.s_f + self.delta - 1.0) / (self.delta * self.s_h)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        let all = [self.b_u, self.d_u, self.delta, self.s_f, self.s_h, self.k];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("parameters must be finite");
        }
        if self.b_u <= 0.0 {
            return fail("b_u > 0 is required");
        }
        if self.d_u <= 0.0 {
            return fail("d_u > 0 is required");
        }
        if self.k <= 0.0 {
            return fail("K > 0 is required");
        }
        if self.delta <= 1.0 {
            return fail("delta > 1 is required");
        }
        if !(0.0 <= self.s_f && self.s_f < self.s_h && self.s_h <= 1.0) {
            return fail("0 <= s_f < s_h <= 1 is required");
        }
        if self.s_f + self.delta * (1.0 - self.s_h) >= 1.0 {
            return fail("s_f + delta*(1 - s_h) < 1 is required");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReactionKind {
    Wolbachia(WolbachiaParams),
    Cubic { theta: f64 },
}

/// Roots and potential values that organize the phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmarks {
    pub theta: f64,
    /// Inflection point of `f` on the lower branch (root of `f'` in `(0, θ)`).
    pub alpha1: f64,
    /// Root of `f'` in `(θ, 1)`.
    pub alpha2: f64,
    /// Root of `F` in `(θ, 1)`.
    pub beta: f64,
    pub f_theta: f64,
    pub f_zero: f64,
    pub f_one: f64,
}

/// An immutable reaction term with its precomputed antiderivative and landmarks.
#[derive(Debug, Clone)]
pub struct ReactionModel {
    kind: ReactionKind,
    theta: f64,
    // Chebyshev interpolant of F when there is no closed form.
    antiderivative: Option<Chebyshev>,
    landmarks: Landmarks,
}

// Rational-form pieces: f = scale * N / Q with N = p(1-p)(p-θ).
struct Rational {
    scale: f64,
    theta: f64,
    q2: f64,
    q1: f64,
}

impl Rational {
    fn of(w: &WolbachiaParams, theta: f64) -> Self {
        Self {
            scale: w.delta * w.d_u * w.s_h,
            theta,
            q2: w.s_h,
            q1: w.s_f + w.s_h,
        }
    }

    fn parts(&self, p: f64) -> [f64; 6] {
        let th = self.theta;
        let n = p * (1.0 - p) * (p - th);
        let dn = -3.0 * p * p + 2.0 * (1.0 + th) * p - th;
        let d2n = -6.0 * p + 2.0 * (1.0 + th);
        let q = self.q2 * p * p - self.q1 * p + 1.0;
        let dq = 2.0 * self.q2 * p - self.q1;
        let d2q = 2.0 * self.q2;
        [n, dn, d2n, q, dq, d2q]
    }

    fn f(&self, p: f64) -> f64 {
        let [n, _, _, q, _, _] = self.parts(p);
        self.scale * n / q
    }

    fn df(&self, p: f64) -> f64 {
        let [n, dn, _, q, dq, _] = self.parts(p);
        self.scale * (dn * q - n * dq) / (q * q)
    }

    fn d2f(&self, p: f64) -> f64 {
        let [n, dn, d2n, q, dq, d2q] = self.parts(p);
        let num = dn * q - n * dq;
        self.scale * ((d2n * q - n * d2q) / (q * q) - 2.0 * dq * num / (q * q * q))
    }
}

impl ReactionModel {
    pub fn kind(&self) -> &ReactionKind {
        &self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn landmarks(&self) -> &Landmarks {
        &self.landmarks
    }

    /// `f(p)`. No range check; callers inside the crate stay in `[0, 1]`.
    pub fn f(&self, p: f64) -> f64 {
        match &self.kind {
            ReactionKind::Cubic { theta } => p * (1.0 - p) * (p - theta),
            ReactionKind::Wolbachia(w) => Rational::of(w, self.theta).f(p),
        }
    }

    pub fn df(&self, p: f64) -> f64 {
        match &self.kind {
            ReactionKind::Cubic { theta } => -3.0 * p * p + 2.0 * (1.0 + theta) * p - theta,
            ReactionKind::Wolbachia(w) => Rational::of(w, self.theta).df(p),
        }
    }

    pub fn d2f(&self, p: f64) -> f64 {
        match &self.kind {
            ReactionKind::Cubic { theta } => -6.0 * p + 2.0 * (1.0 + theta),
            ReactionKind::Wolbachia(w) => Rational::of(w, self.theta).d2f(p),
        }
    }

    /// The potential `F(p) = ∫₀ᵖ f`.
    pub fn big_f(&self, p: f64) -> f64 {
        match (&self.kind, &self.antiderivative) {
            (ReactionKind::Cubic { theta }, _) => {
                let p2 = p * p;
                -0.25 * p2 * p2 + (1.0 + theta) / 3.0 * p2 * p - 0.5 * theta * p2
            }
            (ReactionKind::Wolbachia(_), Some(cheb)) => {
                if p == 0.0 {
                    0.0
                } else {
                    cheb.eval(p)
                }
            }
            (ReactionKind::Wolbachia(_), None) => unreachable!("antiderivative is built at construction"),
        }
    }

    /// Range-checked `(f, f', F)` at a proportion.
    pub fn evaluate(&self, p: f64) -> Result<(f64, f64, f64)> {
        check_proportion("p", p)?;
        Ok((self.f(p), self.df(p), self.big_f(p)))
    }

    /// Lower bound on `|f'|` over `[0, 1]` taken from its maximum, used for
    /// explicit-step limits.
    pub fn max_abs_df(&self) -> f64 {
        let mut m = self.df(0.0).abs().max(self.df(1.0).abs());
        for &c in &self.d2f_roots(0.0, 1.0) {
            m = m.max(self.df(c).abs());
        }
        m
    }

    /// Roots of `f''` inside `(lo, hi)`, found by a sign-change scan.
    pub fn d2f_roots(&self, lo: f64, hi: f64) -> Vec<f64> {
        const SCAN: usize = 256;
        let mut roots = Vec::new();
        if hi <= lo {
            return roots;
        }
        let h = (hi - lo) / SCAN as f64;
        let mut a = lo;
        let mut fa = self.d2f(a);
        for i in 1..=SCAN {
            let b = if i == SCAN { hi } else { lo + i as f64 * h };
            let fb = self.d2f(b);
            if fa == 0.0 && a > lo {
                roots.push(a);
            } else if fa * fb < 0.0 {
                if let Ok(r) = crate::numerics::bisect(|p| self.d2f(p), a, b, 1e-14) {
                    roots.push(r);
                }
            }
            a = b;
            fa = fb;
        }
        roots
    }
}

impl Nonlinearity for ReactionModel {
    fn f(&self, p: f64) -> f64 {
        ReactionModel::f(self, p)
    }

    fn df(&self, p: f64) -> f64 {
        ReactionModel::df(self, p)
    }
}

/// Builds the Wolbachia reaction term after checking the parameter constraints.
pub fn make_wolbachia_reaction(params: WolbachiaParams) -> Result<ReactionModel> {
    params.validate()?;
    let theta = params.theta();
    let rational = Rational::of(&params, theta);
    // Denominator minimum on [0, 1]: at the vertex if inside, else an endpoint.
    let vertex = (rational.q1 / (2.0 * rational.q2)).clamp(0.0, 1.0);
    let q_min = [0.0, vertex, 1.0]
        .iter()
        .map(|&p| rational.parts(p)[3])
        .fold(f64::INFINITY, f64::min);
    if q_min <= 0.0 {
        return Err(Error::InvalidParameter(
            "denominator s_h p^2 - (s_f + s_h) p + 1 must stay positive on [0, 1]".into(),
        ));
    }
    let opts = QuadratureOptions {
        abs_tol: 1e-16,
        rel_tol: 1e-15,
        max_intervals: 200,
    };
    let mut failure = None;
    let cheb = Chebyshev::adaptive(
        |x| match integrate(|s| rational.f(s), 0.0, x, &opts) {
            Ok(v) => v.value,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        1.0,
        1e-15,
        256,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let mut model = ReactionModel {
        kind: ReactionKind::Wolbachia(params),
        theta,
        antiderivative: Some(cheb),
        landmarks: placeholder(theta),
    };
    finish(&mut model)?;
    Ok(model)
}

/// Builds the cubic test model `f = p(1 - p)(p - θ)`, which has a closed-form `F`.
pub fn make_cubic_reaction(theta: f64) -> Result<ReactionModel> {
    if !(theta > 0.0 && theta < 0.5) {
        return Err(Error::OutOfRange {
            what: "theta",
            value: theta,
            lo: 0.0,
            hi: 0.5,
        });
    }
    let mut model = ReactionModel {
        kind: ReactionKind::Cubic { theta },
        theta,
        antiderivative: None,
        landmarks: placeholder(theta),
    };
    finish(&mut model)?;
    Ok(model)
}

/// Builds either kind of model.
pub fn make_reaction(kind: ReactionKind) -> Result<ReactionModel> {
    match kind {
        ReactionKind::Wolbachia(w) => make_wolbachia_reaction(w),
        ReactionKind::Cubic { theta } => make_cubic_reaction(theta),
    }
}

fn placeholder(theta: f64) -> Landmarks {
    Landmarks {
        theta,
        alpha1: f64::NAN,
        alpha2: f64::NAN,
        beta: f64::NAN,
        f_theta: f64::NAN,
        f_zero: 0.0,
        f_one: f64::NAN,
    }
}

fn finish(model: &mut ReactionModel) -> Result<()> {
    if model.big_f(1.0) <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "F(1) = {} must be positive for a bistable term favouring 1",
            model.big_f(1.0)
        )));
    }
    model.landmarks = compute_landmarks(model)?;
    Ok(())
}

/// Locates `α₁`, `α₂` (critical points of `f`) and `β` (the nonzero root of `F`).
pub fn compute_landmarks(model: &ReactionModel) -> Result<Landmarks> {
    const TOL: f64 = 1e-12;
    let theta = model.theta;
    let alpha1 = bisect_polish(|p| model.df(p), |p| model.d2f(p), 0.0, theta, TOL)?;
    let alpha2 = bisect_polish(|p| model.df(p), |p| model.d2f(p), theta, 1.0, TOL)?;
    let beta = bisect_polish(|p| model.big_f(p), |p| model.f(p), theta, 1.0, TOL)?;
    Ok(Landmarks {
        theta,
        alpha1,
        alpha2,
        beta,
        f_theta: model.big_f(theta),
        f_zero: 0.0,
        f_one: model.big_f(1.0),
    })
}
