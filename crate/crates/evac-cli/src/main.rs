//! `evac` command line: run experiments from a flat key=value config,
//! fit a GPD to an excess file, and dump/verify critic snapshot bundles.
//!
//! Exit codes: 0 success; 2 invalid configuration or arguments;
//! 3 numerical failure (density underflow, degenerate fit); 1 I/O error.

mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunConfig, CONFIG_DOC};
use evac::error::{Error, Result};

#[derive(Parser)]
#[command(name = "evac", version, about = "Risk-averse distributional RL experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config across all seeds, writing
    /// per-seed CSVs, summary.csv, and config.resolved to out_dir.
    #[command(after_help = CONFIG_DOC)]
    Run {
        /// Config file (key = value per line); defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit a generalized Pareto distribution to a file of one excess per
    /// line and print `xi,sigma,loglik` CSV to stdout.
    FitGpd {
        /// Input file: one non-negative excess value per line
        #[arg(long)]
        input: PathBuf,
        /// Gradient-ascent learning rate
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        /// Gradient-ascent steps (full refit)
        #[arg(long, default_value_t = 500)]
        steps: usize,
        /// Reserved for interface stability; the fit is deterministic
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Train a critic (first configured seed) and write its snapshot
    /// bundle: a quantile-table CSV and a tail-parameter CSV.
    DumpCritic {
        /// Config file (key = value per line); defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output path for `s,a,tau,theta` rows
        #[arg(long)]
        out_tables: PathBuf,
        /// Output path for `s,a,xi,sigma` rows
        #[arg(long)]
        out_gpds: PathBuf,
    },
    /// Load a critic snapshot bundle, verify it round-trips bit-exactly,
    /// and print a one-row description CSV to stdout.
    LoadCritic {
        /// Path of the `s,a,tau,theta` table dump
        #[arg(long)]
        tables: PathBuf,
        /// Path of the `s,a,xi,sigma` tail dump
        #[arg(long)]
        gpds: PathBuf,
        /// Body/tail threshold level the bundle was trained with
        #[arg(long)]
        eta: f64,
        /// Warmup updates recorded into the restored critic
        #[arg(long, default_value_t = 0)]
        warmup_updates: u64,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        None => RunConfig::from_text(""),
        Some(p) => RunConfig::from_text(&std::fs::read_to_string(p)?),
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => experiments::run(&load_config(&config)?),
        Command::FitGpd { input, lr, steps, seed: _ } => {
            print!("{}", experiments::fit_excess_file(&input, lr, steps)?);
            Ok(())
        }
        Command::DumpCritic { config, out_tables, out_gpds } => {
            let cfg = load_config(&config)?;
            let (tables, gpds) = experiments::trained_critic_bundle(&cfg)?;
            evac::io::write_file(&out_tables, &tables)?;
            evac::io::write_file(&out_gpds, &gpds)?;
            Ok(())
        }
        Command::LoadCritic { tables, gpds, eta, warmup_updates } => {
            print!("{}", experiments::verify_critic_bundle(&tables, &gpds, eta, warmup_updates)?);
            Ok(())
        }
    }
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::Parse(_) => 2,
        Error::Numerical(_) | Error::DegenerateData(_) => 3,
        Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_for(&err))
        }
    }
}
