//! `drt`: LMP policies and demand-response targeting from the command line.
//!
//! Exit status is 0 on success, 1 when the problem itself is infeasible
//! (dispatch, DR, uncovered load) or a computation fails, and 2 for bad
//! input.

mod commands;
mod experiment;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "drt",
    version,
    about = "LMP policies by multi-parametric QP and demand-response targeting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one economic dispatch and write LMPs, duals and flows as JSON.
    Sced(ScedArgs),
    /// Build the piecewise-affine LMP policy over the case's load box.
    Policy(PolicyArgs),
    /// Choose at most K nodes and their reductions to steer the averaged LMP.
    Target(TargetArgs),
    /// Like `target`, but load moves between nodes with zero net change.
    Shift(TargetArgs),
    /// Exhaustive targeting by subset enumeration (N <= 10, K <= 3).
    Oracle(TargetArgs),
    /// Generate Gaussian load scenarios around a base load.
    Scenarios(ScenarioArgs),
    /// Per-node CSV view of a targeting plan.
    Report(ReportArgs),
    /// Run targeting over load scenarios and tabulate the results as CSV.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct ScedArgs {
    /// Network case JSON.
    #[arg(long)]
    case: PathBuf,
    /// Load vector file, or `base` for the case's base load.
    #[arg(long, default_value = "base")]
    load: String,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Slack below which an inequality counts as active.
    #[arg(long, default_value_t = drt_core::qpcore::EPS_ACTIVE)]
    eps_act: f64,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct PolicyArgs {
    #[command(subcommand)]
    eval: Option<PolicyCommand>,
    /// Network case JSON.
    #[arg(long, required = true)]
    case: Option<PathBuf>,
    /// Output policy JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Slack below which an inequality counts as active.
    #[arg(long, default_value_t = drt_core::qpcore::EPS_ACTIVE)]
    eps_act: f64,
    /// Minimum Chebyshev radius for a region to count as full-dimensional.
    #[arg(long, default_value_t = drt_core::mpqp::MIN_RADIUS)]
    min_radius: f64,
    /// Compare the policy with direct dispatch at this many random loads.
    #[arg(long, default_value_t = 0)]
    coverage_samples: usize,
    /// Seed for degeneracy perturbations and coverage samples.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum PolicyCommand {
    /// Evaluate a stored policy at one load.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Policy JSON written by `drt policy`.
    #[arg(long)]
    policy: PathBuf,
    /// Load vector file, or `base` for the case's base load.
    #[arg(long, default_value = "base")]
    load: String,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Reduce,
    Shift,
}

#[derive(Debug, Args)]
struct TargetingArgs {
    /// Network case JSON.
    #[arg(long)]
    case: PathBuf,
    /// Policy JSON; built from the case with default settings when omitted.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Reference averaged LMP.
    #[arg(long, allow_negative_numbers = true)]
    lambda_ref: f64,
    /// Maximum number of targeted nodes.
    #[arg(long)]
    k: usize,
    /// Per-node weight on the reduction: one number or a node-vector file.
    #[arg(long, default_value = "1.1")]
    weight: String,
    /// Maximum reduction: a fraction of each node's load or a node-vector file.
    #[arg(long, default_value = "0.3")]
    xbar: String,
    /// Reduce load, or shift it between nodes [default: reduce].
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Keep the weight term in shift mode.
    #[arg(long)]
    with_linear_term: bool,
}

#[derive(Debug, Args)]
struct TargetArgs {
    #[command(flatten)]
    targeting: TargetingArgs,
    /// Load before DR: a file, or `base` for the case's base load.
    #[arg(long, default_value = "base")]
    load: String,
    /// Output plan JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Network case JSON.
    #[arg(long)]
    case: PathBuf,
    /// Center of the scenarios: a file, or `base`.
    #[arg(long, default_value = "base")]
    load: String,
    /// Standard deviation of the per-node noise in MW.
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Plan JSON written by `drt target`, `drt shift` or `drt oracle`.
    #[arg(long)]
    plan: PathBuf,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    targeting: TargetingArgs,
    /// Scenario file from `drt scenarios`; generated from the flags below
    /// when omitted.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Center of generated scenarios: a file, or `base`.
    #[arg(long, default_value = "base")]
    load: String,
    /// Standard deviation of the per-node noise in MW.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also solve the highest-LMP heuristic and add its columns.
    #[arg(long)]
    compare_heuristic: bool,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("DRT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("DRT_THREADS must be a non-negative integer, got `{raw}`"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Sced(a) => commands::sced(&a),
        Command::Policy(a) => match &a.eval {
            Some(PolicyCommand::Eval(e)) => commands::policy_eval(e),
            None => commands::policy(&a),
        },
        Command::Target(a) => commands::target(&a, commands::Solver::Proposed),
        Command::Shift(a) => {
            if a.targeting.mode == Some(ModeArg::Reduce) {
                bail!("`drt shift` always shifts; drop --mode or use `drt target`");
            }
            commands::target(&a, commands::Solver::Shift)
        }
        Command::Oracle(a) => commands::target(&a, commands::Solver::Oracle),
        Command::Scenarios(a) => commands::scenarios(&a),
        Command::Report(a) => commands::report(&a),
        Command::Experiment(a) => experiment::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
