use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gsp_filter::sim::with_threads;
use serde_json::json;

mod config;
mod decay;
mod family;
mod filter;
mod report;
mod verify;

use config::RunConfig;
use report::Output;

/// Optimal linear filters for signal-plus-noise models, with Weyl and Gabor diagnostics.
#[derive(Debug, Parser)]
#[command(name = "gsp-filter", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML with flat sections). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed, overriding `[run] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the result table.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Solve for the optimal filter and tabulate the error functional.
    Filter,
    /// Run the invariant suite.
    Verify,
    /// Build Gabor matrix columns and fit their off-diagonal decay.
    Decay,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Filter => "filter",
            Command::Verify => "verify",
            Command::Decay => "decay",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(cfg.output.dir.clone().unwrap_or_else(|| "gsp-out".into())));
    let out = match Output::create(&dir) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = with_threads(None, || match cli.command {
        Command::Filter => filter::run(&cfg, &out, cli.quiet),
        Command::Verify => verify::run(&cfg, &out, cli.quiet),
        Command::Decay => decay::run(&cfg, &out, cli.quiet),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let summary = json!({ "command": cli.command.name(), "error": e, "pass": false });
            if let Err(e) = out.json("summary.json", &summary) {
                eprintln!("error: {e}");
            }
            ExitCode::from(2)
        }
    }
}
