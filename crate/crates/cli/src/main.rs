use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use pcsim::{exit_code, run, Command, Overrides, RunArgs};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Solve,
    Cdf,
    Verify,
    Relay,
    Track,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Sync,
    Async,
}

/// Damped fixed-point power control experiments.
#[derive(Debug, Parser)]
#[command(name = "pcsim", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Sync)]
    mode: Mode,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let command = match cli.command {
        Sub::Solve => Command::Solve,
        Sub::Cdf => Command::Cdf,
        Sub::Verify => Command::Verify,
        Sub::Relay => Command::Relay,
        Sub::Track => Command::Track,
    };
    let args = RunArgs {
        command,
        config: cli.config,
        seed: cli.seed,
        seeds: cli.seeds,
        out: cli.out,
        overrides: Overrides { asynchronous: matches!(cli.mode, Mode::Async), theta: cli.theta, tol: cli.tol },
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("pcsim: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
