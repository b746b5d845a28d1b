//! Batch front-end: configuration file + subcommands, deterministic seeding,
//! artifact output. Exit 0 when every gate passes, 1 on a gate failure
//! (naming the failed criterion), 2 on a configuration error (naming the
//! offending key).

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::{ConfigError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "trimwalk",
    about = "Trimmed branching random walks, their mean-field ODE, and the stationary free obstacle problem: simulation and cross-validation"
)]
struct Cli {
    /// Configuration file (flat `key = value` with dotted sections).
    #[arg(long, global = true, default_value = "trimwalk.cfg")]
    config: PathBuf,

    /// Override a config entry, e.g. --set grid.epsilon=0.05 (repeatable).
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,

    /// Cap the worker pool.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Emit SVG plots alongside the CSV artifacts.
    #[arg(long, global = true)]
    plots: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Event-driven particle simulation; snapshots and removal ledger.
    Simulate,
    /// Mean-field grid ODE solve; density/removal path artifacts.
    Solve,
    /// Emit and verify a closed-form stationary solution.
    Stationary,
    /// Particle-to-ODE convergence sweep in N.
    ConvergeN,
    /// ODE-to-closed-form convergence sweep in eps.
    ConvergeEps,
    /// Coupled trimmed/untrimmed runs; exact pathwise domination.
    Dominate,
    /// Shared-noise two-walker coupling diagnostics.
    Couple,
    /// Operator identity suite on the configured grid.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        trimwalk::exec::configure_jobs(jobs);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(cfg_err) = err.downcast_ref::<ConfigError>() {
                eprintln!("config error: {cfg_err}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {err}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&cli.config, &cli.overrides)?;
    let dir = cfg.output_dir()?;
    let output = match &cli.command {
        Command::Simulate => commands::simulate(&cfg, &dir)?,
        Command::Solve => commands::solve_cmd(&cfg, &dir, cli.plots)?,
        Command::Stationary => commands::stationary(&cfg, &dir, cli.plots)?,
        Command::ConvergeN => commands::converge_n(&cfg, &dir, cli.plots)?,
        Command::ConvergeEps => commands::converge_eps(&cfg, &dir, cli.plots)?,
        Command::Dominate => commands::dominate(&cfg, &dir)?,
        Command::Couple => commands::couple(&cfg, &dir)?,
        Command::Verify => commands::verify(&cfg, &dir)?,
    };
    for artifact in &output.artifacts {
        println!("wrote {}", artifact.display());
    }
    let mut failed = Vec::new();
    for gate in &output.gates {
        let verdict = if gate.pass { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] {}: {:.6e} {} {:.6e}",
            gate.name, gate.value, gate.cmp, gate.threshold
        );
        if !gate.pass {
            failed.push(gate.name.clone());
        }
    }
    if !failed.is_empty() {
        anyhow::bail!("failed gates: {}", failed.join("; "));
    }
    Ok(())
}
