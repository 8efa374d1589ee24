use std::path::PathBuf;
use std::process::ExitCode;

use bandit_coord::harness::{self, bench, output, verify, ExperimentConfig};
use bandit_coord::Error;
use clap::{Parser, Subcommand};

/// Bandit submodular coordination experiments.
#[derive(Parser)]
#[command(name = "bandit-coord", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Also compute the per-step hindsight optimum of every episode.
        #[arg(long)]
        with_oracle: bool,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in property suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add a supermodular function that must be caught.
        #[arg(long)]
        inject_supermodular: bool,
    },
    /// Time one episode per algorithm and count gated evaluations.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Config(_) | Error::Parameter(_) | Error::EnumerationBudget { .. } => 2,
        _ => 1,
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    ExperimentConfig::from_json(&text)
}

fn simulate(path: &PathBuf, with_oracle: bool, trials: Option<usize>, seed: Option<u64>) -> Result<(), Error> {
    let mut config = load(path)?;
    if let Some(n) = trials {
        config.trials = n;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    let result = harness::simulate(&config, with_oracle)?;
    let dir = &config.output.dir;
    let summary = output::write_outputs(&result, dir)?;
    for a in &summary.algorithms {
        println!(
            "{:<12} cumulative value {:>10.3} ± {:<8.3} final-quartile distance {:>9.3}",
            a.algorithm.as_str(),
            a.cumulative_value.mean,
            a.cumulative_value.stderr,
            a.final_quartile_total_min_distance.mean,
        );
    }
    println!("wrote {} and {}", dir.join("results.csv").display(), dir.join("summary.json").display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate {
            config,
            with_oracle,
            trials,
            seed,
        } => simulate(&config, with_oracle, trials, seed).map(|_| ExitCode::SUCCESS),
        Command::Verify {
            seed,
            inject_supermodular,
        } => {
            let report = verify::run_verify(verify::VerifyOptions {
                seed,
                inject_supermodular,
            })?;
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Bench { config } => {
            let report = bench::run_bench(&load(&config)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
