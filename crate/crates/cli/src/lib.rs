//! Command-line front end: argument definitions and subcommand drivers.

pub mod commands;
pub mod heatmap;
pub mod manifest;
pub mod parse;
pub mod selfcheck;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Outcome;

/// Exit status when a run completed but an invariant check failed.
pub const EXIT_FLAGGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ambpol", version, about = "Ambient-backscatter polarization simulator")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a preset scene to a JSON file.
    SceneGen(commands::SceneGenArgs),
    /// Contrast maps over a grid of tag positions.
    Map(commands::MapArgs),
    /// Outage and SNR-captured curves over the coverage region.
    Outage(commands::OutageArgs),
    /// Optimal tag orientation from the projection model.
    Opssa(commands::OpssaArgs),
    /// Solver invariant checks.
    Selfcheck(commands::SelfcheckArgs),
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "--threads must be at least 1");
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building thread pool")?;
    pool.install(|| match &cli.command {
        Command::SceneGen(a) => commands::scene_gen(a),
        Command::Map(a) => commands::map(a),
        Command::Outage(a) => commands::outage(a),
        Command::Opssa(a) => commands::opssa(a),
        Command::Selfcheck(a) => commands::selfcheck(a),
    })
}
