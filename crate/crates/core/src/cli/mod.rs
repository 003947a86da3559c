//! Command-line front end.

mod commands;
mod config;

pub use commands::{
    artifact_stem, cmd_ber_table, cmd_eval, cmd_gen_data, cmd_train, print_summary, split_dataset, sweep_channel, Splits,
    TrainArtifact,
};
pub use config::{
    parse_grid, ChannelMode, ChannelSection, DatasetSection, ExperimentConfig, ModelSection, Resolved, ScheduleSection,
};

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::amptrain::PipelineVariant;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "digisem", about = "Digital semantic link: data, training, evaluation, BER tables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured synthetic dataset.
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Generator seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file, overriding `dataset.path`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train variants and write checkpoints and metric logs.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        variant: Option<PipelineVariant>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, overriding `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Bits per symbol, overriding `model.bits`.
        #[arg(long)]
        bits: Option<u32>,
    },
    /// Sweep checkpoints over an SNR grid and write the PSNR CSV.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        snr_grid: Option<String>,
        /// Evaluation seeds; repeat for several.
        #[arg(long)]
        seed: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo and closed-form BER per SNR.
    BerTable {
        #[arg(long, default_value = "0:18:1")]
        snr_grid: String,
        /// Monte Carlo bits per grid point.
        #[arg(long, default_value_t = 1_000_000)]
        bits: u64,
        #[arg(long, default_value_t = 16)]
        order: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { config, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let path = cmd_gen_data(&cfg, seed, out.as_deref())?;
            println!("wrote {}", path.display());
        }
        Command::Train {
            config,
            variant,
            seed,
            out,
            bits,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(b) = bits {
                cfg.model.bits = b;
            }
            for a in cmd_train(&cfg, variant, seed, out.as_deref())? {
                println!("{} seed {}: {} sha256 {}", a.variant, a.seed, a.checkpoint.display(), a.hash);
            }
        }
        Command::Eval {
            config,
            checkpoint,
            snr_grid,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let grid = snr_grid.as_deref().map(parse_grid).transpose()?;
            let seeds = (!seed.is_empty()).then_some(seed.as_slice());
            let result = cmd_eval(&cfg, &checkpoint, grid.as_deref(), seeds, &out)?;
            print_summary(&result, std::io::stdout().lock())?;
        }
        Command::BerTable {
            snr_grid,
            bits,
            order,
            seed,
            out,
        } => {
            cmd_ber_table(&parse_grid(&snr_grid)?, bits, order, seed, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
