use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use xlra::commands::{cmd_run, cmd_sweep_delta, ProtocolSelection};
use xlra::config::parse_config;
use xlra::CliError;

#[derive(Parser)]
#[command(
    name = "xlra",
    version,
    about = "Monte Carlo simulator for grant-based random access with an extra-large antenna array"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    SucreXl,
    NomaXl,
    Both,
}

impl ProtocolArg {
    fn selection(self) -> ProtocolSelection {
        match self {
            ProtocolArg::SucreXl => ProtocolSelection::SucreXl,
            ProtocolArg::NomaXl => ProtocolSelection::NomaXl,
            ProtocolArg::Both => ProtocolSelection::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured campaign grid and write per-metric CSVs.
    Run {
        /// Scenario configuration (TOML); missing keys use built-in defaults.
        #[arg(long)]
        config: PathBuf,
        /// Protocol(s) to simulate.
        #[arg(long, value_enum, default_value = "both")]
        protocol: ProtocolArg,
        /// Worker threads (default: all cores). Results do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Exhaustively search the decision-bias scale for the best sum rate.
    SweepDelta {
        /// Scenario configuration (TOML); missing keys use built-in defaults.
        #[arg(long)]
        config: PathBuf,
        /// Lower edge of the search grid.
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        lo: f64,
        /// Upper edge of the search grid.
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        hi: f64,
        /// Grid spacing.
        #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
        step: f64,
        /// Trials per grid point (default: the config's trial count).
        #[arg(long)]
        trials_per_point: Option<usize>,
        /// Protocol to sweep; only noma-xl has a tunable scale.
        #[arg(long, value_enum, default_value = "noma-xl")]
        protocol: ProtocolArg,
        /// Worker threads (default: all cores). Results do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            protocol,
            workers,
            seed,
            out,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(s) = seed {
                cfg.run.master_seed = s;
            }
            cmd_run(&cfg, protocol.selection(), workers, &out)
        }
        Command::SweepDelta {
            config,
            lo,
            hi,
            step,
            trials_per_point,
            protocol,
            workers,
            seed,
            out,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(s) = seed {
                cfg.run.master_seed = s;
            }
            cmd_sweep_delta(
                &cfg,
                protocol.selection(),
                lo,
                hi,
                step,
                trials_per_point,
                workers,
                &out,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
