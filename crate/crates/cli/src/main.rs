use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tgf_cli::commands::{self, GlobalOptions};
use tgf_cli::CliError;

/// Stochastic third-grade fluid simulator on the periodic square.
#[derive(Debug, Parser)]
#[command(name = "tgf", version)]
struct Cli {
    /// Run configuration (TOML); the reference configuration if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Continue `simulate` from a checkpoint file.
    #[arg(long, global = true, value_name = "CHECKPOINT")]
    resume: Option<PathBuf>,
    /// Overrides the configured ensemble size.
    #[arg(long, global = true, value_name = "N")]
    ensemble: Option<usize>,
    /// Worker threads for ensemble members (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trajectories with energy ledgers, snapshots and checkpoints.
    Simulate,
    /// Twin runs with shared noise against the weighted stability envelope.
    Stability,
    /// Long-run averages, stationary bounds and tail checks.
    Invariant,
    /// Operator and noise property suites.
    Verify,
    /// Throughput of the step kernel.
    Bench {
        #[arg(long, default_value_t = 200)]
        steps: u64,
    },
    /// Gnuplot data files from CSV outputs.
    PlotData { inputs: Vec<PathBuf> },
    /// Prints the resolved configuration.
    PrintConfig,
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Other(e.to_string()))?;
    }
    let opts =
        GlobalOptions { config: cli.config, seed: cli.seed, out: cli.out, resume: cli.resume, ensemble: cli.ensemble };
    if opts.resume.is_some() && !matches!(cli.command, Command::Simulate) {
        return Err(CliError::Config { path: "--resume".into(), message: "only `simulate` can resume".into() });
    }
    match cli.command {
        Command::Simulate => commands::simulate(&opts),
        Command::Stability => commands::stability(&opts),
        Command::Invariant => commands::invariant(&opts),
        Command::Verify => commands::verify(&opts),
        Command::Bench { steps } => commands::bench(&opts, steps),
        Command::PlotData { inputs } => commands::plot_data(&opts, &inputs),
        Command::PrintConfig => commands::print_config(&opts),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(line) => {
            println!("{}", line.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
