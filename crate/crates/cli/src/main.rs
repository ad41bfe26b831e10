use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use quatflag_cli::config::{resolve_seed, SEED_ENV};
use quatflag_cli::report::render_table;
use quatflag_cli::{run, ExperimentKind, ExperimentSpec};

/// Simulation experiments for Brownian motion on Sp(n), the quaternionic flag
/// manifold and its stochastic areas.
#[derive(Parser)]
#[command(name = "quatflag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[command(rename_all = "snake_case")]
enum Command {
    /// Brownian motion on Sp(n): basis, mean decay, radial law, mean ODE, skew product.
    SpnBm(RunArgs),
    /// Flag Brownian motion: area symmetry, horizontality, ergodic averages.
    FlagArea(RunArgs),
    /// Empirical characteristic function of the areas against the spectral formula.
    CfCompare(RunArgs),
    /// Covariance of the rescaled areas against its large-time limit.
    CltArea(RunArgs),
    /// Covariance of the rescaled windings against both candidate limits.
    WindingClt(RunArgs),
    /// Jacobi polynomial eigenfunction and orthonormality checks.
    JacobiChecks(RunArgs),
    /// Dirichlet moments, heat kernel and stationary-integral checks.
    SpectralChecks(RunArgs),
    /// Print a runnable configuration for an experiment kind.
    Template {
        #[arg(value_enum)]
        kind: ExperimentKind,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; the kind's template is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides the configuration and the environment.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(kind: ExperimentKind, args: RunArgs) -> anyhow::Result<bool> {
    let mut spec = match &args.config {
        Some(p) => ExperimentSpec::load(p)?,
        None => ExperimentSpec::template(kind),
    };
    if spec.kind != kind {
        anyhow::bail!("configuration is for {}, not {kind}", spec.kind);
    }
    let env = std::env::var(SEED_ENV).ok();
    spec.sim.seed = resolve_seed(spec.sim.seed, args.seed, env.as_deref())?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let out = args
        .out
        .or_else(|| spec.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    let (outcome, files) = run(&spec, workers, &out).with_context(|| format!("{kind} failed"))?;
    print!("{}", render_table(&outcome.report, 40));
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(outcome.report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Template { kind } => {
            let text = serde_json::to_string_pretty(&ExperimentSpec::template(kind)).expect("templates serialize");
            println!("{text}");
            return ExitCode::SUCCESS;
        }
        Command::SpnBm(a) => (ExperimentKind::SpnBm, a),
        Command::FlagArea(a) => (ExperimentKind::FlagArea, a),
        Command::CfCompare(a) => (ExperimentKind::CfCompare, a),
        Command::CltArea(a) => (ExperimentKind::CltArea, a),
        Command::WindingClt(a) => (ExperimentKind::WindingClt, a),
        Command::JacobiChecks(a) => (ExperimentKind::JacobiChecks, a),
        Command::SpectralChecks(a) => (ExperimentKind::SpectralChecks, a),
    };
    match execute(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
