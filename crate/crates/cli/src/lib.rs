//! Command-line workflows for the self-trapped wave function laboratory.

pub mod commands;
pub mod config;
pub mod diagnose;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
    #[error("{0}")]
    Io(String),
    #[error("{0} invariant check(s) failed")]
    Invariant(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "selftrap-lab", version, about = "Self-trapped wave functions: construction, comparison and free evolution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set selftrap.u0=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for a self-trapped state and write its profile.
    Solve(RunArgs),
    /// Evolve a self-trapped or Gaussian state freely and record diagnostics.
    Evolve(RunArgs),
    /// Write a self-trapped density next to the Gaussian of equal second moment.
    Compare(RunArgs),
    /// Re-check the outputs stored in a directory.
    Diagnose {
        /// Directory written by solve, compare or evolve.
        #[arg(long, visible_alias = "out")]
        input: PathBuf,
    },
}

/// Runs a parsed command, printing a one-line report per output or check.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(a) => {
            let st = commands::solve(&load(a)?, &a.out)?;
            println!("q_m = {} ± {}", output::num(st.q_m), output::num(st.q_m_uncertainty));
        }
        Command::Compare(a) => {
            let s = commands::compare(&load(a)?, &a.out)?;
            println!("sigma = {}, peak ratio = {}", output::num(s.sigma), output::num(s.peak_ratio));
        }
        Command::Evolve(a) => {
            let rec = commands::evolve(&load(a)?, &a.out)?;
            println!(
                "{} samples, T_convexity = {}, t_near_caustic = {}",
                rec.samples.len(),
                output::opt(rec.t_convexity),
                output::opt(rec.t_near_caustic)
            );
        }
        Command::Diagnose { input } => {
            let checks = diagnose::diagnose(input)?;
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                return Err(CliError::Invariant(failed));
            }
        }
    }
    Ok(())
}

fn load(a: &RunArgs) -> Result<RunConfig, CliError> {
    RunConfig::load(a.config.as_deref(), &a.set)
}
