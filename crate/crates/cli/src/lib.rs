//! `habdf` command-line front end: simulate the fault scenario, fuse recorded
//! track logs, evaluate tracks against ground truth and sweep parameters.

pub mod commands;
pub mod config;
pub mod error;
pub mod records;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "habdf",
    version,
    about = "Hierarchical adaptive fusion of redundant detectors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the three-sensor fault simulation.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: `out_dir` from the config, else `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fuse a recorded track log of three or more detectors.
    Fuse {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score estimated tracks against ground truth.
    Eval {
        /// Fused track or track log; repeat for several.
        #[arg(long = "estimate", required = true)]
        estimates: Vec<PathBuf>,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the simulation over a Cartesian parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `key=v1,v2,...` with a dotted config key; repeat for more axes.
        #[arg(long, required = true)]
        grid: Vec<commands::GridAxis>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Allow grids above the cell limit.
        #[arg(long)]
        force: bool,
    },
}

const DEFAULT_OUT: &str = "out";

fn out_dir(out: Option<PathBuf>, config: Option<&Path>) -> Result<PathBuf> {
    if let Some(out) = out {
        return Ok(out);
    }
    if let Some(path) = config {
        if let Some(dir) = config::RunConfig::load(path)?.out_dir {
            return Ok(dir);
        }
    }
    Ok(PathBuf::from(DEFAULT_OUT))
}

/// Runs one command, printing a short report on stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let out = out_dir(out, Some(&config))?;
            let res = commands::simulate(&config, &out, seed)?;
            println!(
                "simulated {} frames: fused rmse {:.4}; wrote {} and {}",
                res.run.records.len(),
                res.run.rmse_fused(),
                res.frames.display(),
                res.summary.display()
            );
        }
        Command::Fuse {
            tracks,
            config,
            out,
        } => {
            let out = out_dir(out, config.as_deref())?;
            let res = commands::fuse(&tracks, config.as_deref(), &out)?;
            println!(
                "fused {} frames from {} detectors; wrote {} and {}",
                res.frames.len(),
                res.detectors.len(),
                res.fused.display(),
                res.weights.display()
            );
        }
        Command::Eval { estimates, gt, out } => {
            let out = out_dir(out, None)?;
            let res = commands::eval(&estimates, &gt, &out)?;
            print!("{}", commands::render_table(&res.summaries));
        }
        Command::Sweep {
            config,
            grid,
            out,
            seed,
            force,
        } => {
            let out = out_dir(out, Some(&config))?;
            let res = commands::sweep(&config, &grid, &out, seed, force)?;
            println!("ran {} cells; wrote {}", res.runs.len(), res.path.display());
        }
    }
    Ok(())
}
