//! `planar`: generate datasets, train and evaluate planar perceptron
//! networks, run sweeps and transfer matrices, render artifacts.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use planar_core::Error;

#[derive(Debug, Parser)]
#[command(name = "planar", version, about)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for data generation and weight initialisation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Grayscale,
    BlackWhite,
    Mixed,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the configured dataset and write it out as PNGs with a manifest.
    Gen,
    /// Train a network; writes report, curves, checkpoint, structure and panels.
    Train,
    /// Chained evaluation of a checkpoint on the configured dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// One training run per value of a single parameter.
    Sweep {
        /// batch_size, learning_rate, rotation_degrees, neighborhood_radius,
        /// translation_vector or scale_factor.
        #[arg(long)]
        axis: Option<String>,
        /// Values to try; translations as `dx,dy`.
        #[arg(long, num_args = 1.., allow_hyphen_values = true)]
        values: Vec<String>,
    },
    /// Train on each dataset and evaluate on every dataset.
    Transfer {
        /// Preset dataset family instead of the config's `transfer` list.
        #[arg(long, value_enum)]
        family: Option<Family>,
        /// Drawing corpus directory (synthesised when missing).
        #[arg(long)]
        drawings: Option<PathBuf>,
        /// Photo corpus directory (synthesised when missing).
        #[arg(long)]
        photos: Option<PathBuf>,
    },
    /// Draw a checkpoint's weights and example outputs.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Extra images to push through the network.
        #[arg(long)]
        image: Vec<PathBuf>,
    },
    /// Rerun a fixed experiment: table1, table2, radius3, learning_rate,
    /// rotation_degrees, translation, fig3, fig8, noise, transfer_grayscale,
    /// transfer_bw or transfer_mixed.
    Repro {
        target: String,
        /// Number of seeds, counted up from `--seed` (default 0).
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        drawings: Option<PathBuf>,
        #[arg(long)]
        photos: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        Error::Numeric(_) => 4,
        Error::InvalidInput(_) | Error::Data(_) | Error::Io { .. } | Error::Image { .. } => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let jobs = cli.jobs;
    let result = planar_core::experiments::with_jobs(jobs, move || commands::dispatch(cli))
        .and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("planar: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
