use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "bistable-robin",
    version,
    about = "Steady states, thresholds, stability and dynamics of a bistable reaction-diffusion equation with Robin boundary conditions"
)]
pub struct Cli {
    /// Describe the CSV and JSON output formats and exit.
    #[arg(long)]
    pub help_formats: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Landmarks, length thresholds, and (given --L) every steady state with its verdict, as JSON.
    Analyze(AnalyzeArgs),
    /// Steady-state profiles as CSV.
    Steady(SteadyArgs),
    /// Stability verdicts and linearized eigenvalues, as JSON.
    Stability(StabilityArgs),
    /// Time integration of the scalar equation, or of the two-species system with --epsilon.
    Simulate(SimulateArgs),
    /// Boundary values of the symmetric branches over a range of half-lengths.
    Sweep(SweepArgs),
    /// Distance between the two-species proportion and the scalar solution for decreasing epsilon.
    EpsilonStudy(EpsilonArgs),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Analyze(a) => &a.common,
            Command::Steady(a) => &a.common,
            Command::Stability(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::Sweep(a) => &a.common,
            Command::EpsilonStudy(a) => &a.common,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    Wolbachia,
    Cubic,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Table1,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassFilter {
    Sd,
    Si,
    Nonsm,
    Constant,
    All,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Reaction term.
    #[arg(long, value_enum, default_value = "wolbachia")]
    pub model: ModelName,
    /// Start the mosquito rates from a named parameter set.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Unstable zero of the cubic term.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Birth rate of uninfected mosquitoes.
    #[arg(long)]
    pub b_u: Option<f64>,
    /// Death rate of uninfected mosquitoes.
    #[arg(long)]
    pub d_u: Option<f64>,
    /// Lifespan reduction factor of infected mosquitoes.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Fecundity decrease of infected females.
    #[arg(long)]
    pub s_f: Option<f64>,
    /// Hatching failure under cytoplasmic incompatibility.
    #[arg(long)]
    pub s_h: Option<f64>,
    /// Exterior infection proportion.
    #[arg(long = "pext")]
    pub p_ext: f64,
    /// Boundary migration rate.
    #[arg(long = "D")]
    pub d: f64,
    /// key=value file with defaults for any long option of the subcommand.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output path (standard output when omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Half-length of the domain; enables the steady-state census.
    #[arg(long = "L")]
    pub l: Option<f64>,
    /// Nodes per profile and for the linearized eigenvalue.
    #[arg(long, default_value_t = bistable_robin::DEFAULT_N_GRID)]
    pub n_grid: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct SteadyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "L")]
    pub l: f64,
    #[arg(long, value_enum, default_value = "all")]
    pub class: ClassFilter,
    #[arg(long, default_value_t = bistable_robin::DEFAULT_N_GRID)]
    pub n_grid: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "L")]
    pub l: f64,
    #[arg(long, default_value_t = bistable_robin::DEFAULT_N_GRID)]
    pub n_grid: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "L")]
    pub l: f64,
    /// Uniform initial proportion.
    #[arg(long)]
    pub p_init: f64,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub dx: Option<f64>,
    /// Output times, comma separated (the final time is always written).
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    /// Integrate the two-species system with this time-scale ratio.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "L-min")]
    pub l_min: f64,
    #[arg(long = "L-max")]
    pub l_max: f64,
    #[arg(long, default_value_t = 200)]
    pub n_points: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct EpsilonArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "L")]
    pub l: f64,
    #[arg(long)]
    pub p_init: f64,
    /// Strictly decreasing list, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.01")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 50.0)]
    pub t_max: f64,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub dx: Option<f64>,
}

/// Parses `argv`, first splicing in the `--config` file (if any) right after
/// the subcommand so that later command-line flags override it.
pub fn parse(argv: Vec<OsString>) -> Result<Cli, CliError> {
    let Some(sub) = argv.get(1).and_then(|s| s.to_str()).filter(|s| !s.starts_with('-')) else {
        return Cli::try_parse_from(argv).map_err(CliError::Clap);
    };
    let Some(path) = config_path(&argv[2..]) else {
        return Cli::try_parse_from(argv).map_err(CliError::Clap);
    };
    let Some(cmd) = Cli::command().find_subcommand(sub).cloned() else {
        return Cli::try_parse_from(argv).map_err(CliError::Clap);
    };
    let entries = read_config(&path)?;
    let mut spliced: Vec<OsString> = argv[..2].to_vec();
    for (key, value) in entries {
        let flag = key.replace('_', "-");
        let arg = cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(flag.as_str()) && flag != "config")
            .ok_or_else(|| CliError::Config(format!("{}: unknown key {key:?}", path.display())))?;
        if arg.get_action().takes_values() {
            spliced.push(format!("--{flag}").into());
            spliced.push(value.into());
        } else {
            match value.as_str() {
                "true" => spliced.push(format!("--{flag}").into()),
                "false" => {}
                _ => {
                    return Err(CliError::Config(format!(
                        "{}: {key} expects true or false, got {value:?}",
                        path.display()
                    )))
                }
            }
        }
    }
    spliced.extend(argv[2..].iter().cloned());
    Cli::try_parse_from(spliced).map_err(CliError::Clap)
}

fn config_path(rest: &[OsString]) -> Option<PathBuf> {
    let mut it = rest.iter();
    let mut found = None;
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(v) = s.strip_prefix("--config=") {
            found = Some(PathBuf::from(v));
        }
    }
    found
}

/// `key = value` lines; `#` starts a comment. Duplicate keys are rejected.
fn read_config(path: &PathBuf) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{}:{}: expected key = value", path.display(), k + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(CliError::Config(format!(
                "{}:{}: expected key = value",
                path.display(),
                k + 1
            )));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Config(format!(
                "{}:{}: duplicate key {key:?}",
                path.display(),
                k + 1
            )));
        }
    }
    Ok(out)
}
