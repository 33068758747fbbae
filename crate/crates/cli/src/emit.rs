use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use bistable_robin::{
    EpsilonError, Extended, Landmarks, ReactionKind, SteadyProfile, ThresholdReport, Trajectory, Verdict,
};
use serde::Serialize;

use crate::CliError;

pub const FORMATS: &str = "\
Output formats

All numbers use the shortest decimal that reads back to the same double.
Rerunning a command with the same inputs rewrites the same bytes.

steady  (CSV)
  x,p,class,label
  One block per steady state, blocks separated by a blank line.
  class is SD, SI, nonSM or constant; label numbers states within a class
  (SD-1, SD-2, ...) in increasing order of the boundary value.

simulate  (CSV)
  scalar:       t,x,p
  with epsilon: t,x,n_i,n_u,p_eps
  One row per node per written time, time-major.

sweep  (CSV)
  L,branch,p_at_L
  One row per boundary value of each symmetric branch (SD, SI) at each L
  of the grid. A grid point without any root is written once as L,none,
  with an empty p_at_L, so every grid value appears.

epsilon-study  (CSV)
  epsilon,l2_error,linf_error

analyze  (JSON)
  { model: {kind, ...rates or theta},
    env: {L, D, p_ext},
    landmarks: {theta, alpha1, alpha2, beta},
    thresholds: {M_d, M_i, M_star, D_star},
    lambda1,
    solutions: [{class, label, p_at_L, p_at_0, verdict, mu1}] }
  Thresholds are the string \"0\", the string \"inf\", or a number. D_star is
  omitted when no critical rate exists; L and lambda1 are null and solutions
  is empty when --L is not given.

stability  (JSON)
  { env, lambda1, solutions: [{class, label, p_at_L, p_at_0,
    fprime_min, fprime_max, verdict, mu1}] }
  verdict is StableByTheorem, UnstableByTheorem or Inconclusive.
";

/// Where an artifact goes.
pub enum Sink {
    Stdout,
    File(PathBuf),
}

impl Sink {
    pub fn new(path: Option<&Path>) -> Self {
        match path {
            Some(p) if p != Path::new("-") => Sink::File(p.to_path_buf()),
            _ => Sink::Stdout,
        }
    }

    /// Writes `body`, then prints `summary` on stdout (stderr when the
    /// artifact itself went to stdout).
    pub fn emit(&self, body: &str, summary: &str) -> Result<(), CliError> {
        match self {
            Sink::Stdout => {
                let mut out = io::stdout().lock();
                out.write_all(body.as_bytes())
                    .map_err(|e| CliError::Io("<stdout>".into(), e))?;
                out.flush().map_err(|e| CliError::Io("<stdout>".into(), e))?;
                eprintln!("<stdout>: {summary}");
            }
            Sink::File(path) => {
                write_atomic(path, body.as_bytes())?;
                println!("{}: {summary}", path.display());
            }
        }
        Ok(())
    }
}

/// Temp file in the target directory, then rename over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let err = |e| CliError::Io(path.display().to_string(), e);
    let name = path
        .file_name()
        .ok_or_else(|| err(io::Error::new(io::ErrorKind::InvalidInput, "not a file path")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(err)
}

pub fn profiles_csv(profiles: &[&SteadyProfile]) -> String {
    let mut s = String::from("x,p,class,label\n");
    for (k, prof) in profiles.iter().enumerate() {
        if k > 0 {
            s.push('\n');
        }
        let class = prof.class.as_str();
        for (x, p) in prof.x.iter().zip(&prof.p) {
            let _ = writeln!(s, "{x},{p},{class},{}", prof.label);
        }
    }
    s
}

pub fn trajectory_csv(tr: &Trajectory) -> String {
    let system = tr.snapshots.first().is_some_and(|s| s.n_i.is_some());
    let mut s = String::from(if system { "t,x,n_i,n_u,p_eps\n" } else { "t,x,p\n" });
    for snap in &tr.snapshots {
        let t = snap.t;
        match (&snap.n_i, &snap.n_u) {
            (Some(ni), Some(nu)) => {
                for (k, x) in tr.x.iter().enumerate() {
                    let _ = writeln!(s, "{t},{x},{},{},{}", ni[k], nu[k], snap.p[k]);
                }
            }
            _ => {
                for (x, p) in tr.x.iter().zip(&snap.p) {
                    let _ = writeln!(s, "{t},{x},{p}");
                }
            }
        }
    }
    s
}

/// Rows of `(L, branch, roots)`.
pub fn sweep_csv(rows: &[(f64, Vec<(&str, f64)>)]) -> String {
    let mut s = String::from("L,branch,p_at_L\n");
    for (l, roots) in rows {
        if roots.is_empty() {
            let _ = writeln!(s, "{l},none,");
        }
        for (branch, q) in roots {
            let _ = writeln!(s, "{l},{branch},{q}");
        }
    }
    s
}

pub fn epsilon_csv(rows: &[EpsilonError]) -> String {
    let mut s = String::from("epsilon,l2_error,linf_error\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.epsilon, r.l2_error, r.linf_error);
    }
    s
}

#[derive(Serialize)]
pub struct EnvJson {
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "D")]
    pub d: f64,
    pub p_ext: f64,
}

#[derive(Serialize)]
pub struct LandmarksJson {
    pub theta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
}

impl From<&Landmarks> for LandmarksJson {
    fn from(l: &Landmarks) -> Self {
        Self {
            theta: l.theta,
            alpha1: l.alpha1,
            alpha2: l.alpha2,
            beta: l.beta,
        }
    }
}

#[derive(Serialize)]
pub struct ThresholdsJson {
    #[serde(rename = "M_d")]
    pub m_d: Extended,
    #[serde(rename = "M_i")]
    pub m_i: Extended,
    #[serde(rename = "M_star")]
    pub m_star: Extended,
    #[serde(rename = "D_star", skip_serializing_if = "Option::is_none")]
    pub d_star: Option<f64>,
}

impl From<&ThresholdReport> for ThresholdsJson {
    fn from(r: &ThresholdReport) -> Self {
        Self {
            m_d: r.m_d.value,
            m_i: r.m_i.value,
            m_star: r.m_star.value,
            d_star: r.d_star,
        }
    }
}

#[derive(Serialize)]
pub struct SolutionJson {
    pub class: &'static str,
    pub label: String,
    #[serde(rename = "p_at_L")]
    pub p_at_l: f64,
    pub p_at_0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fprime_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fprime_max: Option<f64>,
    pub verdict: Verdict,
    pub mu1: Option<f64>,
}

#[derive(Serialize)]
pub struct Report {
    pub model: ReactionKind,
    pub env: EnvJson,
    pub landmarks: LandmarksJson,
    pub thresholds: ThresholdsJson,
    pub lambda1: Option<f64>,
    pub solutions: Vec<SolutionJson>,
}

#[derive(Serialize)]
pub struct StabilityReport {
    pub env: EnvJson,
    pub lambda1: f64,
    pub solutions: Vec<SolutionJson>,
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Profile value at the center of the domain.
pub fn value_at_center(p: &SteadyProfile) -> f64 {
    let n = p.p.len();
    if n % 2 == 1 {
        p.p[n / 2]
    } else {
        0.5 * (p.p[n / 2 - 1] + p.p[n / 2])
    }
}
