//! `lich` — command-line front end for the verification workbench.
//!
//! Exit codes: 0 when every verdict passes, 1 when a check fails, 2 on
//! usage or configuration errors.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use commands::Ctx;
use config::FileConfig;
use report::Backend;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lich", version, about = "symmetric-tensor operator workbench")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for report artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for multi-mode scans.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Arithmetic backend; rational reports are byte-reproducible.
    #[arg(long, global = true, value_enum, default_value_t = Backend::Rational)]
    backend: Backend,
    /// Seed for randomized exact checks.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustive and randomized exact checks of the fibre algebra.
    FibreSuite,
    /// Convergence suite for the operator identities on a model metric.
    IdentitySuite,
    /// Symbolic assembly of the block operator, its indicial family and
    /// the change-of-scale matrix.
    Assemble,
    /// Pole scan of the continued resolvent over a λ-window.
    ResonanceScan,
    /// Continued-resolvent application and the trace-free decoupled solve.
    PipelineThm,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (config, config_bytes) = match FileConfig::load(cli.config.as_deref()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let ctx = Ctx {
        backend: cli.backend,
        seed: cli.seed,
        threads: cli.threads.max(1),
        out: cli.out,
        config,
        config_bytes,
    };
    let result = match cli.command {
        Command::FibreSuite => commands::fibre_suite(&ctx),
        Command::IdentitySuite => commands::identity_suite_cmd(&ctx),
        Command::Assemble => commands::assemble(&ctx),
        Command::ResonanceScan => commands::resonance_scan(&ctx),
        Command::PipelineThm => commands::pipeline_thm(&ctx),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
