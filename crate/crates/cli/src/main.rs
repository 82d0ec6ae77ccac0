use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use monoflow_cli::{resolve_out, run, CliError, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "monoflow", version, about = "Simulate monotone delay equations and their pullback equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate a model and write the trajectory.
    Simulate(Args),
    /// Compute sub-/super-equilibria and their pullback limits.
    Pullback(Args),
    /// Run a verification suite.
    Verify(Args),
    /// Distances between fields or to translates.
    Distance(Args),
    /// Exponential decay fit of the linear part.
    Decay(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overridden by MONOFLOW_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the sampling and convergence tolerances.
    #[arg(long)]
    tolerance: Option<f64>,
}

fn execute(cmd: Command, args: Args) -> Result<i32, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.apply_overrides(args.seed, args.tolerance);
    cfg.validate()?;
    if args.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let out = resolve_out(args.out.as_deref(), &cfg);
    let outcome = run(cmd, &cfg, &out, args.jobs)?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Pullback(a) => (Command::Pullback, a),
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::Distance(a) => (Command::Distance, a),
        Cmd::Decay(a) => (Command::Decay, a),
    };
    let code = match execute(cmd, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("monoflow: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code.clamp(0, 255) as u8)
}
