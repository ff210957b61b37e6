// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use restframe::dynamics::DynamicsError;

mod config;
mod decompose;
mod limits;
mod report;
mod simulate;
mod verify;

use config::Setup;
use report::Status;

#[derive(Debug, Parser)]
#[command(name = "restframe", version, about = "Rest-frame dynamics of charged particles and the transverse field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for the library's parallel loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Use ordinary real charges instead of nilpotent ones.
    #[arg(long, global = true)]
    commuting_charges: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the dressed-particle equations and record conserved quantities.
    Simulate,
    /// Run invariant suites and write a pass/fail report.
    Verify {
        /// Suites to run; all of them when omitted.
        #[arg(long = "suite", value_enum)]
        suites: Vec<verify::Suite>,
    },
    /// Split the field of a combined state into radiation and particle parts.
    Decompose,
    /// Sweep c and fit the non-relativistic convergence orders.
    Limits,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Some(path) = cli.config.as_deref() else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(1);
    };
    let setup = match Setup::load(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = std::fs::create_dir_all(&cli.out).map_err(anyhow::Error::from).and_then(|()| match &cli.command {
        Command::Simulate => simulate::run(&setup, &cli.out, cli.commuting_charges),
        Command::Verify { suites } => verify::run(&setup, &cli.out, suites, cli.commuting_charges),
        Command::Decompose => decompose::run(&setup, &cli.out),
        Command::Limits => limits::run(&setup, &cli.out),
    });
    match result {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<DynamicsError>() {
                Some(DynamicsError::Singular { .. }) => ExitCode::from(Status::Singular.code()),
                Some(DynamicsError::Drift { .. }) => ExitCode::from(Status::Violation.code()),
                _ => ExitCode::from(1),
            }
        }
    }
}
