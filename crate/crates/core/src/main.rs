use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use txcost::config::{ExperimentConfig, ValueMethod};
use txcost::experiment;
use txcost::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Generators, dual generators and section of the solvency cone.
    Cone,
    /// Bellman value on the configured tree, or by Monte Carlo.
    Value,
    /// Tree values for a growing number of steps.
    Converge,
    /// Repair of a deliberately inadmissible strategy.
    RepairDemo,
    /// Event tree, sampled price paths and a consistent price system.
    Simulate,
    /// Value with and without an independent coin.
    Randomize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Enumerate,
    Dp,
    Both,
    Mc,
}

/// Utility maximisation under proportional transaction costs.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `run.method`.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

fn run(cli: &Cli) -> Result<String, Error> {
    let mut cfg = ExperimentConfig::from_file(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(m) = cli.method {
        cfg.method = match m {
            MethodArg::Enumerate => ValueMethod::Enumerate,
            MethodArg::Dp => ValueMethod::Dp,
            MethodArg::Both => ValueMethod::Both,
            MethodArg::Mc => ValueMethod::Mc,
        };
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Cone => experiment::cmd_cone(&cfg),
        Command::Value => experiment::cmd_value(&cfg, cfg.method),
        Command::Converge => experiment::cmd_converge(&cfg),
        Command::RepairDemo => experiment::cmd_repair_demo(&cfg),
        Command::Simulate => experiment::cmd_simulate(&cfg),
        Command::Randomize => experiment::cmd_randomize(&cfg),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Budget { .. } = e {
                eprintln!("hint: lower tree.n, grid.cap or the dp lattice, raise grid.step, or switch to --method dp");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
