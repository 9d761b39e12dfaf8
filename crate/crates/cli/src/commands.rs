use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use contagion_core::homogeneous::{s_n, survival_curve, t_n_approx};
use contagion_core::model::{all_default_breakdown_constant, all_default_breakdown_delayed};
use contagion_core::optimizer::{bound_report, search_optimal_size};
use contagion_core::{estimate_survival, Error as CoreError, SurvivalEstimate};
use serde::Serialize;

use crate::error::CliError;
use crate::format::csv;
use crate::spec_file::{DeltaMode, GroupSpecFile};

const DEFAULT_TRIALS: u64 = 100_000;
const DEFAULT_SEED: u64 = 0;

/// Survival of joint-liability groups under default contagion.
#[derive(Debug, Parser)]
#[command(name = "contagion", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exact,
    Mc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Survival probability of the group described by a JSON spec file.
    Compute {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        method: Method,
        /// Monte Carlo trials (default: the file's value, else 100000).
        #[arg(long)]
        trials: Option<u64>,
        /// Monte Carlo seed (default: the file's value, else 0).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Survival of homogeneous groups of size 1..=n-max, as CSV.
    Sweep {
        /// Probability that the leader survives to the horizon.
        #[arg(long, default_value_t = 1.0)]
        leader: f64,
        /// Probability that a member defaults on its own by the horizon.
        #[arg(long)]
        c1: f64,
        /// Probability that one member's default brings down another.
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 100)]
        n_max: usize,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add the large-group approximation column.
        #[arg(long)]
        approx: bool,
    },
    /// Analytic bounds on the optimal group size, as JSON.
    Bounds {
        /// Probability that a member defaults on its own by the horizon.
        #[arg(long)]
        c1: f64,
        /// Probability that one member's default brings down another.
        #[arg(long)]
        q: f64,
        /// Tolerated shortfall from the best survival, relative to the leader's.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
    },
    /// Best group size within the delta-suboptimal search range, as JSON.
    Optimize {
        /// Probability that the leader survives to the horizon.
        #[arg(long, default_value_t = 1.0)]
        leader: f64,
        /// Probability that a member defaults on its own by the horizon.
        #[arg(long)]
        c1: f64,
        /// Probability that one member's default brings down another.
        #[arg(long)]
        q: f64,
        /// Tolerated shortfall from the best survival, relative to the leader's.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Also write the searched survival curve as CSV.
        #[arg(long)]
        curve_out: Option<PathBuf>,
    },
    /// Monte Carlo estimate for a spec file with a `simulation` block, as JSON.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct ExactReport {
    method: &'static str,
    delta_mode: &'static str,
    n: usize,
    survival: f64,
    all_default: f64,
    subtotals_by_size: Vec<f64>,
}

#[derive(Serialize)]
struct EstimateReport {
    estimate: f64,
    std_error: f64,
    ci95: (f64, f64),
    trials: u64,
    seed: u64,
}

impl From<SurvivalEstimate> for EstimateReport {
    fn from(e: SurvivalEstimate) -> Self {
        Self {
            estimate: e.estimate,
            std_error: e.std_error,
            ci95: e.ci95,
            trials: e.trials,
            seed: e.seed,
        }
    }
}

#[derive(Serialize)]
struct McReport {
    method: &'static str,
    survival: f64,
    std_error: f64,
    ci95: (f64, f64),
    trials: u64,
    seed: u64,
}

#[derive(Serialize)]
struct OptimizeReport {
    best_n: usize,
    best_survival: f64,
    #[serde(rename = "U")]
    search_limit: usize,
    delta: f64,
}

/// Runs one command and returns what it prints on standard output.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Compute {
            spec,
            method,
            trials,
            seed,
        } => compute(spec, *method, *trials, *seed),
        Command::Sweep {
            leader,
            c1,
            q,
            n_max,
            out,
            approx,
        } => {
            let text = sweep(*leader, *c1, *q, *n_max, *approx)?;
            emit(text, out.as_deref())
        }
        Command::Bounds { c1, q, delta } => to_json(&bound_report(*c1, *q, *delta)?),
        Command::Optimize {
            leader,
            c1,
            q,
            delta,
            curve_out,
        } => optimize(*leader, *c1, *q, *delta, curve_out.as_deref()),
        Command::Simulate {
            spec,
            trials,
            seed,
            out,
        } => {
            let file = GroupSpecFile::read(spec)?;
            if file.simulation.is_none() {
                return Err(CliError::Input(format!(
                    "{}: a `simulation` block is required",
                    spec.display()
                )));
            }
            let est = estimate_survival(&file.simulation(*trials, *seed)?)?;
            emit(to_json(&EstimateReport::from(est))?, out.as_deref())
        }
    }
}

fn compute(
    path: &Path,
    method: Method,
    trials: Option<u64>,
    seed: Option<u64>,
) -> Result<String, CliError> {
    let file = GroupSpecFile::read(path)?;
    match method {
        Method::Exact => {
            let spec = file.group()?;
            let breakdown = match file.delta_mode {
                DeltaMode::None => all_default_breakdown_constant(&spec),
                DeltaMode::Delayed => all_default_breakdown_delayed(&spec),
            }
            .map_err(|e| match e {
                CoreError::SizeCapExceeded { .. } => {
                    CliError::Capability(format!(
                        "{e}: exact enumeration grows exponentially with the group size, rerun with --method mc"
                    ))
                }
                other => other.into(),
            })?;
            to_json(&ExactReport {
                method: "exact",
                delta_mode: match file.delta_mode {
                    DeltaMode::None => "none",
                    DeltaMode::Delayed => "delayed",
                },
                n: spec.n(),
                survival: spec.leader_survival * (1.0 - breakdown.total),
                all_default: breakdown.total,
                subtotals_by_size: breakdown.by_size,
            })
        }
        Method::Mc => {
            let trials = trials
                .or(file.simulation.as_ref().and_then(|s| s.trials))
                .unwrap_or(DEFAULT_TRIALS);
            let seed = seed
                .or(file.simulation.as_ref().and_then(|s| s.seed))
                .unwrap_or(DEFAULT_SEED);
            let est = estimate_survival(&file.simulation(Some(trials), Some(seed))?)?;
            to_json(&McReport {
                method: "mc",
                survival: est.estimate,
                std_error: est.std_error,
                ci95: est.ci95,
                trials: est.trials,
                seed: est.seed,
            })
        }
    }
}

/// CSV rows `n, survival, s_n[, survival_approx]` for `n = 1..=n_max`.
pub fn sweep(leader: f64, c1: f64, q: f64, n_max: usize, approx: bool) -> Result<String, CliError> {
    if n_max == 0 {
        return Err(CliError::Input("--n-max must be at least 1".into()));
    }
    let survival = survival_curve(leader, c1, q, n_max)?;
    let mut header = vec!["n", "survival", "s_n"];
    if approx {
        header.push("survival_approx");
    }
    let rows = survival.into_iter().enumerate().map(|(i, v)| {
        let n = i + 1;
        let mut row = vec![v, s_n(c1, q, n)];
        if approx {
            row.push(leader * (1.0 - t_n_approx(c1, q, n)));
        }
        (n, row)
    });
    Ok(csv(&header, rows))
}

fn optimize(
    leader: f64,
    c1: f64,
    q: f64,
    delta: f64,
    curve_out: Option<&Path>,
) -> Result<String, CliError> {
    let result = search_optimal_size(leader, c1, q, delta)?;
    if let Some(path) = curve_out {
        let rows = result.curve.iter().map(|&(n, v)| (n, vec![v]));
        write_file(path, &csv(&["n", "survival"], rows))?;
    }
    to_json(&OptimizeReport {
        best_n: result.best_n,
        best_survival: result.best_survival,
        search_limit: result.search_limit,
        delta: result.delta,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("cannot encode report: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Writes `text` to `out` when given (printing nothing), else returns it.
fn emit(text: String, out: Option<&Path>) -> Result<String, CliError> {
    match out {
        Some(path) => write_file(path, &text).map(|_| String::new()),
        None => Ok(text),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}
