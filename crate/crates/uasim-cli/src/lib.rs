//! Command-line front end for the unitary-averaging simulator: seeded
//! Monte-Carlo campaigns, grid sweeps, Fock-oracle spot checks, power-law
//! extrapolation, and one-command figure datasets.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod runner;

pub use error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(
    name = "uasim",
    version,
    about = "Monte-Carlo simulator for unitary-averaged photonic circuits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the configured ensemble over its noise values and write a CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the sample count from the config.
        #[arg(long)]
        samples: Option<usize>,
        /// Worker threads (default: UASIM_THREADS, then hardware count).
        #[arg(long)]
        threads: Option<usize>,
        /// Output CSV path (default: config `output`, then results.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full grid (modes × noise × replicas) from the config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Skip rows already present in the output file and append new ones.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Replay one recorded sample through the Fock-space pipeline and
    /// compare against the covariance pipeline.
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
        /// Sample index to replay.
        #[arg(long)]
        sample: usize,
        /// Photon-number cutoff per mode (default: config `cutoff`, then 14).
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Extrapolate fidelity and success probability to a large circuit from
    /// measured single-mode base values.
    Powerlaw {
        /// Mode count of the extrapolated circuit (>= 2).
        #[arg(long)]
        modes: usize,
        /// Replica count.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        sigma_from: f64,
        #[arg(long)]
        sigma_to: f64,
        /// Number of noise values, inclusive of both ends.
        #[arg(long)]
        steps: usize,
        /// Squeezing of the single-mode base measurement.
        #[arg(long)]
        r_base: f64,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the CSV dataset for a named preset.
    Figure {
        /// Preset id; see `figure --id help` for the list.
        #[arg(long)]
        id: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            samples,
            threads,
            out,
        } => commands::run(&config, seed, samples, threads, out),
        Command::Sweep {
            config,
            resume,
            threads,
        } => commands::sweep(&config, resume, threads),
        Command::OracleCheck {
            config,
            sample,
            cutoff,
        } => commands::oracle_check(&config, sample, cutoff),
        Command::Powerlaw {
            modes,
            n,
            sigma_from,
            sigma_to,
            steps,
            r_base,
            samples,
            seed,
            threads,
            out,
        } => commands::powerlaw(
            modes, n, sigma_from, sigma_to, steps, r_base, samples, seed, threads, out,
        ),
        Command::Figure {
            id,
            out_dir,
            samples,
            seed,
            threads,
        } => {
            if id == "help" {
                println!("available presets: {}", figures::PRESETS.join(", "));
                return Ok(());
            }
            commands::figure(&id, out_dir, samples, seed, threads)
        }
    }
}
