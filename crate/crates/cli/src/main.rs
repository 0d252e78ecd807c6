use std::path::PathBuf;
use std::process::ExitCode;

use alphasplit_cli::commands::{run, Command};
use alphasplit_cli::config::ExperimentConfig;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "alphasplit",
    version,
    about = "Rényi-entropy splitting experiments on small lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Exact-diagonalization sweep of a perturbed toric code
    Sweep { config: PathBuf },
    /// Closed-form loop-gas sweep
    Loopgas { config: PathBuf },
    /// Symmetry-broken Ising chain sweep
    Chain { config: PathBuf },
    /// Compare numerics with an exactly solvable reference
    Crosscheck { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, path) = match cli.command {
        Sub::Sweep { config } => (Command::Sweep, config),
        Sub::Loopgas { config } => (Command::Loopgas, config),
        Sub::Chain { config } => (Command::Chain, config),
        Sub::Crosscheck { config } => (Command::Crosscheck, config),
    };
    let outcome = ExperimentConfig::load(&path).and_then(|cfg| run(cmd, &cfg));
    match outcome {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
