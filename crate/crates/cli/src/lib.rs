//! Command-line driver for the `liw` toolkit.
//!
//! `liw <command> [--config FILE] [--seed N] [--jobs N] [--out DIR]
//! [--section.key=value ...]`

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use liw::Error;

use crate::commands::Context;
use crate::config::{extract_overrides, Layout, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "liw", version, about = "Low-interception waveform toolkit")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides `master_seed` in the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Output root for every artifact.
    #[arg(long, global = true, default_value = "liw-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Synthesize training and test datasets.
    Synth,
    /// Train the classifier.
    Train,
    /// Generate LIW from the test frames at the source SNR.
    Attack,
    /// Ideal and channel evaluation of clean and LIW frames.
    Eval,
    /// Channel SNR x PSR accuracy surface.
    Sweep,
    /// Simulated splice, transmit, split loop.
    Hwloop,
    /// Collect evaluation summaries into report.md.
    Report,
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Degenerate(_)
        | Error::Shape { .. }
        | Error::Incompatible(_) => EXIT_VALIDATION,
        Error::Divergence { .. } | Error::NonFiniteGradient { .. } => EXIT_RUNTIME,
        Error::Format { .. } | Error::Version { .. } | Error::Io(_) => EXIT_IO,
    }
}

pub fn execute(command: Command, ctx: &Context) -> liw::Result<manifest::Manifest> {
    match command {
        Command::Synth => commands::cmd_synth(ctx),
        Command::Train => commands::cmd_train(ctx),
        Command::Attack => commands::cmd_attack(ctx),
        Command::Eval => commands::cmd_eval(ctx),
        Command::Sweep => commands::cmd_sweep(ctx),
        Command::Hwloop => commands::cmd_hwloop(ctx),
        Command::Report => commands::cmd_report(ctx),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run(args: Vec<String>) -> i32 {
    let (args, overrides) = extract_overrides(args);
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli, &overrides) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run_cli(cli: &Cli, overrides: &[(String, String)]) -> liw::Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref(), overrides)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if cli.jobs > 0 {
        // Ignored if a pool already exists (tests calling run twice).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    let ctx = Context {
        config,
        layout: Layout::new(&cli.out),
        jobs: cli.jobs,
    };
    execute(cli.command, &ctx)?;
    Ok(())
}
