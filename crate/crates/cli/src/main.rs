use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};
use resilsim_cli::commands::{cmd_compare, cmd_enumerate_teams, cmd_simulate};

#[derive(Parser)]
#[command(name = "resilsim", version, about = "Deterministic resilience simulator for assistance organizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write results.csv and trace.log
    Simulate {
        /// Scenario file (TOML)
        #[arg(long)]
        scenario: PathBuf,
        /// Workload seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run several scenarios across seeds and rank them
    Compare {
        /// Scenario files (repeatable)
        #[arg(long = "scenario", required = true)]
        scenarios: Vec<PathBuf>,
        /// Comma-separated workload seeds
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        /// Output directory
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Count or list the teams a set of role pools can field
    EnumerateTeams {
        /// Pool shape, e.g. "1:0-1,4:0-4,1:0-1" (size:min-max per role)
        #[arg(long)]
        pools: String,
        /// List every team instead of only counting
        #[arg(long)]
        verbose: bool,
        /// Refuse to list spaces larger than this
        #[arg(long, default_value_t = 1_000_000)]
        cap: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { scenario, seed, out_dir } => cmd_simulate(&scenario, seed, &out_dir),
        Command::Compare { scenarios, seeds, out_dir } => {
            let paths: Vec<&std::path::Path> = scenarios.iter().map(PathBuf::as_path).collect();
            cmd_compare(&paths, &seeds, &out_dir)
        }
        Command::EnumerateTeams { pools, verbose, cap } => {
            cmd_enumerate_teams(&pools, u128::from(cap), verbose)
        }
    };
    match result {
        Ok(text) => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            process::exit(err.exit_code());
        }
    }
}
