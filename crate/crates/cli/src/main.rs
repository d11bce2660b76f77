//! `rotflow` — command-line laboratory for rotationally symmetric Ricci
//! flow on the (n+1)-sphere.
//!
//! Subcommands: `run`, `sweep`, `bisect`, `validate`, `soliton-check`.
//! Each takes `--config <json>` and `--out <dir>`; `--seed <u64>` is
//! optional and recorded in every JSON output. Exit codes: 0 success
//! (any verdict), 1 runtime/validation failure, 2 configuration error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rotflow::FlowError;

use crate::config::Need;

#[derive(Parser)]
#[command(name = "rotflow", version, about = "Rotationally symmetric Ricci flow laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration document.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Seed recorded in outputs (reserved for randomized utilities).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve one initial profile, classify the outcome, write artifacts.
    Run(CommonArgs),
    /// Evolve a list of family members concurrently; aggregate a phase table.
    Sweep(CommonArgs),
    /// Bisect the family parameter between shrinking and neckpinch behaviour.
    Bisect(CommonArgs),
    /// Check the structural constraints of the configured initial data.
    Validate(CommonArgs),
    /// Evaluate gradient-shrinker residuals of a profile + potential pair.
    #[command(name = "soliton-check")]
    SolitonCheck(CommonArgs),
}

fn dispatch(cmd: &Cmd) -> Result<i32, FlowError> {
    let (args, need) = match cmd {
        Cmd::Run(a) => (a, Need::Initial),
        Cmd::Sweep(a) => (a, Need::Sweep),
        Cmd::Bisect(a) => (a, Need::Bisect),
        Cmd::Validate(a) => (a, Need::Initial),
        Cmd::SolitonCheck(a) => (a, Need::Soliton),
    };
    let raw = config::load_raw(&args.config)?;
    let cfg = config::resolve(&raw, need, args.seed)?;
    commands::ensure_out_dir(&args.out)?;
    match cmd {
        Cmd::Run(_) => commands::cmd_run(&cfg, &args.out),
        Cmd::Sweep(_) => commands::cmd_sweep(&cfg, &args.out),
        Cmd::Bisect(_) => commands::cmd_bisect(&cfg, &args.out),
        Cmd::Validate(_) => commands::cmd_validate(&cfg, &args.out),
        Cmd::SolitonCheck(_) => commands::cmd_soliton_check(&cfg, &args.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.cmd) {
        Ok(code) => ExitCode::from(code.clamp(0, 255) as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                FlowError::ConfigError { .. } => 2u8,
                _ => 1u8,
            };
            ExitCode::from(code)
        }
    }
}
