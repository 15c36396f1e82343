use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mdicorr_cli::{commands, load_config, Result};

#[derive(Parser)]
#[command(
    name = "mdicorr",
    version,
    about = "Key-rate bounds for MDI QKD with correlated source intensities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Key rate against distance for every configured scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Largest tolerable relative deviation for each configured search.
    Boundary {
        #[arg(long)]
        config: PathBuf,
    },
    /// Correlation parameters from click-rate histograms.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate { config, out } => commands::simulate(&load_config(&config)?, &out),
        Command::Boundary { config } => commands::boundary(&load_config(&config)?),
        Command::Analyze { config, data, out } => {
            commands::analyze(&load_config(&config)?, &data, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mdicorr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
