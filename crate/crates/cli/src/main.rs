mod args;
mod emit;

use std::process::ExitCode;

use bistable_robin::{
    all_steady_states, classify_with_oracle, epsilon_convergence_study, make_cubic_reaction, make_wolbachia_reaction,
    principal_eigenvalue, simulate_scalar, simulate_system, thresholds, BoundaryEnv, Branch, BranchTable, ProfileClass,
    ReactionKind, ReactionModel, SimConfig, SteadyProfile, SystemConfig, WolbachiaParams,
};
use rayon::prelude::*;
use thiserror::Error;

use args::{ClassFilter, Command, Common, ModelName};
use emit::{EnvJson, Report, Sink, SolutionJson, StabilityReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(clap::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error(transparent)]
    Core(#[from] bistable_robin::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_validation() => 3,
            _ => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match args::parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(CliError::Clap(e)) => e.exit(),
        Err(e) => return fail(e),
    };
    if cli.help_formats {
        print!("{}", emit::FORMATS);
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return ExitCode::from(2);
    };
    match run(command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}

fn run(command: Command) -> Result<(), CliError> {
    if let Some(jobs) = command.common().jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match command {
        Command::Analyze(a) => analyze(&a.common, a.l, a.n_grid),
        Command::Steady(a) => steady(&a.common, a.l, a.class, a.n_grid),
        Command::Stability(a) => stability(&a.common, a.l, a.n_grid),
        Command::Simulate(a) => simulate(&a),
        Command::Sweep(a) => sweep(&a),
        Command::EpsilonStudy(a) => epsilon_study(&a),
    }
}

/// Mosquito rates after applying the preset and the individual overrides.
fn wolbachia_params(c: &Common) -> WolbachiaParams {
    let mut p = WolbachiaParams::table1();
    for (slot, v) in [
        (&mut p.b_u, c.b_u),
        (&mut p.d_u, c.d_u),
        (&mut p.delta, c.delta),
        (&mut p.s_f, c.s_f),
        (&mut p.s_h, c.s_h),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    p
}

fn build_model(c: &Common) -> Result<ReactionModel, CliError> {
    let rates_given = [c.b_u, c.d_u, c.delta, c.s_f, c.s_h].iter().any(Option::is_some);
    match c.model {
        ModelName::Wolbachia => {
            if c.theta.is_some() {
                return Err(CliError::Usage("--theta applies to --model cubic only".into()));
            }
            Ok(make_wolbachia_reaction(wolbachia_params(c))?)
        }
        ModelName::Cubic => {
            if rates_given || c.preset.is_some() {
                return Err(CliError::Usage(
                    "mosquito rates and --preset apply to --model wolbachia only".into(),
                ));
            }
            let theta = c
                .theta
                .ok_or_else(|| CliError::Usage("--model cubic needs --theta".into()))?;
            Ok(make_cubic_reaction(theta)?)
        }
    }
}

fn env(c: &Common, l: f64) -> Result<BoundaryEnv, CliError> {
    Ok(BoundaryEnv::new(l, c.d, c.p_ext)?)
}

fn check_grid(n_grid: usize) -> Result<(), CliError> {
    if n_grid < 5 {
        return Err(CliError::Usage("--n-grid must be at least 5".into()));
    }
    Ok(())
}

fn solution_json(
    model: &ReactionModel,
    e: &BoundaryEnv,
    p: &SteadyProfile,
    n: usize,
    slopes: bool,
) -> Result<SolutionJson, CliError> {
    let v = classify_with_oracle(model, e, p, n)?;
    Ok(SolutionJson {
        class: p.class.as_str(),
        label: p.label.clone(),
        p_at_l: p.p_at_l,
        p_at_0: emit::value_at_center(p),
        fprime_min: slopes.then_some(v.fprime_min),
        fprime_max: slopes.then_some(v.fprime_max),
        verdict: v.verdict,
        mu1: v.mu1,
    })
}

fn classified(
    model: &ReactionModel,
    e: &BoundaryEnv,
    n_grid: usize,
    slopes: bool,
) -> Result<Vec<SolutionJson>, CliError> {
    all_steady_states(model, e, n_grid)?
        .par_iter()
        .map(|p| solution_json(model, e, p, n_grid, slopes))
        .collect()
}

fn analyze(c: &Common, l: Option<f64>, n_grid: usize) -> Result<(), CliError> {
    check_grid(n_grid)?;
    let model = build_model(c)?;
    // Thresholds do not depend on L; any admissible length will do.
    let e = env(c, l.unwrap_or(1.0))?;
    let report = thresholds(&model, &e)?;
    let (lambda1, solutions) = match l {
        Some(_) => (Some(principal_eigenvalue(&e)), classified(&model, &e, n_grid, false)?),
        None => (None, Vec::new()),
    };
    let out = Report {
        model: *model.kind(),
        env: EnvJson {
            l,
            d: c.d,
            p_ext: c.p_ext,
        },
        landmarks: model.landmarks().into(),
        thresholds: (&report).into(),
        lambda1,
        solutions,
    };
    let summary = format!(
        "M_d={} M_i={} M_star={}{}",
        report.m_d.value,
        report.m_i.value,
        report.m_star.value,
        match l {
            Some(_) => format!(", {} steady states", out.solutions.len()),
            None => String::new(),
        }
    );
    Sink::new(c.output.as_deref()).emit(&emit::json(&out), &summary)
}

fn steady(c: &Common, l: f64, class: ClassFilter, n_grid: usize) -> Result<(), CliError> {
    check_grid(n_grid)?;
    let model = build_model(c)?;
    let e = env(c, l)?;
    let all = all_steady_states(&model, &e, n_grid)?;
    let keep = |p: &&SteadyProfile| match class {
        ClassFilter::All => true,
        ClassFilter::Sd => p.class == ProfileClass::SD,
        ClassFilter::Si => p.class == ProfileClass::SI,
        ClassFilter::Nonsm => p.class == ProfileClass::NonSM,
        ClassFilter::Constant => p.class == ProfileClass::Constant,
    };
    let chosen: Vec<&SteadyProfile> = all.iter().filter(keep).collect();
    let labels: Vec<&str> = chosen.iter().map(|p| p.label.as_str()).collect();
    let summary = format!("{} steady states [{}]", chosen.len(), labels.join(" "));
    Sink::new(c.output.as_deref()).emit(&emit::profiles_csv(&chosen), &summary)
}

fn stability(c: &Common, l: f64, n_grid: usize) -> Result<(), CliError> {
    check_grid(n_grid)?;
    let model = build_model(c)?;
    let e = env(c, l)?;
    let solutions = classified(&model, &e, n_grid, true)?;
    let summary = solutions
        .iter()
        .map(|s| format!("{}={:?}", s.label, s.verdict))
        .collect::<Vec<_>>()
        .join(" ");
    let out = StabilityReport {
        env: EnvJson {
            l: Some(l),
            d: c.d,
            p_ext: c.p_ext,
        },
        lambda1: principal_eigenvalue(&e),
        solutions,
    };
    Sink::new(c.output.as_deref()).emit(&emit::json(&out), &format!("lambda1={} {summary}", out.lambda1))
}

fn sim_config(
    model: &ReactionModel,
    e: &BoundaryEnv,
    t_max: Option<f64>,
    dt: Option<f64>,
    dx: Option<f64>,
) -> SimConfig {
    let mut cfg = SimConfig::defaults(model, e);
    if let Some(t) = t_max {
        cfg.t_max = t;
        cfg.snapshot_times.retain(|s| *s < t);
    }
    if let Some(dt) = dt {
        cfg.dt = dt;
    }
    if let Some(dx) = dx {
        cfg.dx = dx;
    }
    cfg
}

fn simulate(a: &args::SimulateArgs) -> Result<(), CliError> {
    let c = &a.common;
    let model = build_model(c)?;
    let e = env(c, a.l)?;
    let mut cfg = sim_config(&model, &e, a.t_max, a.dt, a.dx);
    if let Some(times) = &a.snapshots {
        cfg.snapshot_times = times.clone();
    }
    let nodes = cfg.nodes(e.l);
    let traj = match a.epsilon {
        None => simulate_scalar(&model, &e, &vec![a.p_init; nodes], &cfg)?,
        Some(eps) => {
            let ReactionKind::Wolbachia(params) = *model.kind() else {
                return Err(CliError::Usage("--epsilon needs --model wolbachia".into()));
            };
            let sys = SystemConfig::standard(params, eps, e.p_ext, a.p_init, nodes);
            if a.dt.is_none() {
                cfg.dt = cfg.dt.min(0.25 / sys.stiffness());
            }
            simulate_system(&sys, &e, &cfg)?
        }
    };
    let last = traj.last();
    let mean = last.p.iter().sum::<f64>() / last.p.len() as f64;
    let summary = format!(
        "{} snapshots on {} nodes, t={} mean p={mean}",
        traj.snapshots.len(),
        traj.x.len(),
        last.t
    );
    Sink::new(c.output.as_deref()).emit(&emit::trajectory_csv(&traj), &summary)
}

fn sweep(a: &args::SweepArgs) -> Result<(), CliError> {
    let c = &a.common;
    if a.n_points < 2 {
        return Err(CliError::Usage("--n-points must be at least 2".into()));
    }
    if !(a.l_min > 0.0 && a.l_max > a.l_min && a.l_max.is_finite()) {
        return Err(CliError::Usage("need 0 < --L-min < --L-max".into()));
    }
    let model = build_model(c)?;
    let e = env(c, a.l_min)?;
    let tables = [
        ("SD", BranchTable::new(&model, e, Branch::SD)?),
        ("SI", BranchTable::new(&model, e, Branch::SI)?),
    ];
    let step = (a.l_max - a.l_min) / (a.n_points - 1) as f64;
    let grid: Vec<f64> = (0..a.n_points)
        .map(|i| {
            if i + 1 == a.n_points {
                a.l_max
            } else {
                a.l_min + i as f64 * step
            }
        })
        .collect();
    let rows: Vec<(f64, Vec<(&str, f64)>)> = grid
        .par_iter()
        .map(|&l| {
            let roots = tables
                .iter()
                .flat_map(|(name, t)| t.roots(l).into_iter().map(move |q| (*name, q)))
                .collect();
            (l, roots)
        })
        .collect();
    let count = |name: &str, row: &(f64, Vec<(&str, f64)>)| row.1.iter().filter(|(b, _)| *b == name).count();
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let summary = format!(
        "{} lengths in [{}, {}], SD roots {}->{}, SI roots {}->{}",
        rows.len(),
        a.l_min,
        a.l_max,
        count("SD", first),
        count("SD", last),
        count("SI", first),
        count("SI", last)
    );
    Sink::new(c.output.as_deref()).emit(&emit::sweep_csv(&rows), &summary)
}

fn epsilon_study(a: &args::EpsilonArgs) -> Result<(), CliError> {
    let c = &a.common;
    let model = build_model(c)?;
    let ReactionKind::Wolbachia(params) = *model.kind() else {
        return Err(CliError::Usage("epsilon-study needs --model wolbachia".into()));
    };
    let e = env(c, a.l)?;
    let mut cfg = sim_config(&model, &e, Some(a.t_max), a.dt, a.dx);
    cfg.snapshot_times.clear();
    let rows = epsilon_convergence_study(&model, params, &e, a.p_init, &cfg, &a.eps)?;
    let summary = rows
        .iter()
        .map(|r| format!("eps={} l2={}", r.epsilon, r.l2_error))
        .collect::<Vec<_>>()
        .join(", ");
    Sink::new(c.output.as_deref()).emit(&emit::epsilon_csv(&rows), &summary)
}
