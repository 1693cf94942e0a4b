//! `cptmdp solve`: load a model, run the solver, write JSON.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use cptmdp::mdp::{solve_weighted_reach, CptSolveResult, Direction, ParetoApprox, SolveOptions};
use cptmdp::mean_payoff::solve_mean_payoff;
use cptmdp::model::{parse_model, Objective};
use cptmdp::par::Exec;
use cptmdp::prospect::CptParams;
use cptmdp::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cptmdp", version, about = "CPT-optimal strategies for Markov decision processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a model and print the result as JSON.
    Solve(SolverConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Cpt,
    Eu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sense {
    Max,
    Min,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SolverConfig {
    #[arg(long)]
    pub model: PathBuf,
    /// CPT parameters (JSON); standard values when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = Mode::Cpt)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = Sense::Max)]
    pub direction: Sense,
    /// Visit every grid cell instead of branch and bound.
    #[arg(long)]
    pub no_bnb: bool,
    /// Cell budget of the optimizer.
    #[arg(long, default_value_t = 5_000_000)]
    pub max_cells: usize,
    /// Run the optimizer on one thread.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub frontier_out: Option<PathBuf>,
    #[arg(long)]
    pub strategy_out: Option<PathBuf>,
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Invalid(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Solver(format!("{}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Frontier vertices as CSV; for two outcomes they are listed along the frontier.
///
/// `implied` names a coordinate to leave out, normally the penalty outcome.
pub fn frontier_csv(frontier: &ParetoApprox, implied: Option<usize>) -> String {
    let mut pts: Vec<Vec<f64>> = frontier
        .extreme_points
        .iter()
        .map(|p| p.iter().enumerate().filter(|&(i, _)| Some(i) != implied).map(|(_, x)| *x).collect())
        .collect();
    let k = pts.first().map_or(0, Vec::len);
    let mut out = String::new();
    if k == 2 {
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(b[1].total_cmp(&a[1])));
        out.push_str("x,y\n");
    } else {
        out.push_str("# extreme points only, no facet trace\n");
        let header: Vec<String> = (0..k).map(|i| format!("p{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
    }
    for p in &pts {
        let row: Vec<String> = p.iter().map(|x| format!("{}", clean(*x))).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

// Rounds away LP noise such as 1e-17 or 0.49999999999999994.
fn clean(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn emit_frontier_plot_data(frontier: &ParetoApprox, implied: Option<usize>, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, frontier_csv(frontier, implied))
}

fn load_params(cfg: &SolverConfig) -> Result<CptParams, Failure> {
    let given = match &cfg.params {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_failure(p, e))?;
            Some(CptParams::from_json(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    Ok(match (cfg.mode, given) {
        (Mode::Cpt, Some(p)) => p,
        (Mode::Cpt, None) => CptParams::standard(),
        (Mode::Eu, Some(p)) => p.expected_utility(),
        (Mode::Eu, None) => CptParams::identity(),
    })
}

/// Solves as configured, returning the result document.
pub fn solve(cfg: &SolverConfig) -> Result<(CptSolveResult, Value), String> {
    match solve_inner(cfg) {
        Ok(s) => Ok((s.result, s.doc)),
        Err(Failure::Invalid(m) | Failure::Solver(m)) => Err(m),
    }
}

struct Solved {
    result: CptSolveResult,
    doc: Value,
    // penalty coordinate, when no target shares its outcome
    penalty: Option<usize>,
}

fn solve_inner(cfg: &SolverConfig) -> Result<Solved, Failure> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return Err(Failure::Invalid(format!("--epsilon must be positive, got {}", cfg.epsilon)));
    }
    let text = std::fs::read_to_string(&cfg.model).map_err(|e| io_failure(&cfg.model, e))?;
    let (model, objective) =
        parse_model(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", cfg.model.display())))?;
    let params = load_params(cfg)?;
    let opts = SolveOptions {
        epsilon: cfg.epsilon,
        direction: match cfg.direction {
            Sense::Max => Direction::Max,
            Sense::Min => Direction::Min,
        },
        bnb: !cfg.no_bnb,
        exec: if cfg.sequential { Exec::Sequential } else { Exec::default() },
        max_cells: cfg.max_cells,
    };
    let (result, penalty) = match &objective {
        Objective::WeightedReach(o) => {
            let r = solve_weighted_reach(&model, o, &params, &opts)?;
            let shared = o.targets.values().any(|&v| v == o.penalty);
            let at = r.outcomes.iter().position(|&v| v == o.penalty).filter(|_| !shared);
            (r, at)
        }
        Objective::MeanPayoff(r) => (solve_mean_payoff(&model, r, &params, &opts)?, None),
    };
    let mut doc = result.to_json();
    doc["mode"] = Value::from(match cfg.mode {
        Mode::Cpt => "cpt",
        Mode::Eu => "eu",
    });
    doc["direction"] = Value::from(match cfg.direction {
        Sense::Max => "max",
        Sense::Min => "min",
    });
    Ok(Solved { result, doc, penalty })
}

fn execute(cfg: &SolverConfig) -> Result<(), Failure> {
    let Solved { result, doc, penalty } = solve_inner(cfg)?;
    let text = pretty(&doc);
    match &cfg.out {
        Some(p) => write_file(p, &text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Failure::Solver(e.to_string()))?;
        }
    }
    if let Some(p) = &cfg.frontier_out {
        write_file(p, &pretty(&result.frontier.to_json(&result.outcomes)))?;
    }
    if let Some(p) = &cfg.strategy_out {
        write_file(p, &pretty(&result.strategy.to_json()))?;
    }
    if let Some(p) = &cfg.plot_out {
        write_file(p, &frontier_csv(&result.frontier, penalty))?;
    }
    eprintln!(
        "solved in {:.3}s ({} LPs, {} boxes)",
        result.stats.wall_time.as_secs_f64(),
        result.stats.lp_calls,
        result.stats.hypercubes_examined
    );
    Ok(())
}

/// Runs the command line; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let Command::Solve(cfg) = cli.command;
    match execute(&cfg) {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            EXIT_INVALID
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver error: {m}");
            EXIT_SOLVER
        }
    }
}
