use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{ChannelMode, ExperimentConfig, Resolved};
use crate::amptrain::{run_variants, write_metrics_csv, PipelineVariant, Trainer};
use crate::dataset::{Dataset, SyntheticSpec};
use crate::digichain::{ber_table, write_ber_csv, SnrTable, MIN_BITS};
use crate::error::{Error, Result};
use crate::evalkit::{export_csv, snr_sweep, summarize, SweepChannel, SweepResult};
use crate::semcodec::Checkpoint;

/// Test, validation and training splits, in file order.
pub struct Splits {
    pub test: Dataset,
    pub val: Dataset,
    pub train: Dataset,
}

pub fn split_dataset(data: &Dataset, test_count: usize, val_count: usize) -> Result<Splits> {
    if test_count + val_count >= data.len() {
        return Err(Error::Contract(format!(
            "dataset of {} samples cannot hold {test_count} test and {val_count} validation samples",
            data.len()
        )));
    }
    let (test, rest) = data.split(test_count);
    let (val, train) = rest.split(val_count);
    Ok(Splits { test, val, train })
}

fn load_splits(cfg: &ExperimentConfig, resolved: &Resolved) -> Result<Splits> {
    let data = Dataset::load(&cfg.dataset.path)?;
    let s = &resolved.data;
    if (data.c, data.h, data.w) != (s.c, s.h, s.w) {
        return Err(Error::Contract(format!(
            "{}: samples are {}x{}x{}, config expects {}x{}x{}",
            cfg.dataset.path.display(),
            data.c,
            data.h,
            data.w,
            s.c,
            s.h,
            s.w
        )));
    }
    split_dataset(&data, cfg.dataset.test_count, cfg.dataset.val_count)
}

/// Generates the configured dataset; returns the written path. Only the
/// `[dataset]` geometry is checked, so header-only files are possible.
pub fn cmd_gen_data(cfg: &ExperimentConfig, seed: Option<u64>, out: Option<&Path>) -> Result<PathBuf> {
    let d = &cfg.dataset;
    let spec = SyntheticSpec {
        count: d.count,
        c: d.c,
        h: d.h,
        w: d.w,
        generator: d.generator,
        seed: seed.unwrap_or(d.seed),
    };
    if spec.c * spec.h * spec.w == 0 {
        return Err(Error::config(format!("dataset.c/h/w: geometry {}x{}x{} is empty", d.c, d.h, d.w)));
    }
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.dataset.path.clone());
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    spec.generate()?.save(&path)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainArtifact {
    pub variant: PipelineVariant,
    pub seed: u64,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub hash: String,
}

pub fn artifact_stem(variant: PipelineVariant, seed: u64) -> String {
    format!("{}_seed{seed}", variant.name())
}

/// Trains every configured variant and seed; writes one checkpoint and one
/// metrics log per pair.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    variant: Option<PipelineVariant>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<Vec<TrainArtifact>> {
    let resolved = cfg.resolve()?;
    let splits = load_splits(cfg, &resolved)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&dir)?;
    let variants = variant.map(|v| vec![v]).unwrap_or_else(|| resolved.variants.clone());
    let seeds = seed.map(|s| vec![s]).unwrap_or_else(|| cfg.seeds.clone());
    let mut artifacts = Vec::new();
    for &s in &seeds {
        let trainer = Trainer::new(&splits.train, &splits.val, &resolved.schedule, s)?;
        for run in run_variants(&variants, &trainer, &resolved.model)? {
            let stem = artifact_stem(run.variant, s);
            let ckpt = dir.join(format!("{stem}.ckpt"));
            let metrics = dir.join(format!("{stem}_metrics.csv"));
            let hash = run.checkpoint.save(&ckpt)?;
            write_metrics_csv(&run.metrics, fs::File::create(&metrics)?)?;
            artifacts.push(TrainArtifact {
                variant: run.variant,
                seed: s,
                checkpoint: ckpt,
                metrics,
                hash,
            });
        }
    }
    Ok(artifacts)
}

pub fn sweep_channel(cfg: &ExperimentConfig) -> Result<SweepChannel> {
    Ok(match cfg.channel.mode {
        ChannelMode::Bsc => SweepChannel::Bsc(match &cfg.channel.snr_table {
            Some(p) => SnrTable::load(p)?,
            None => SnrTable::reference(),
        }),
        ChannelMode::QamAwgn => SweepChannel::QamAwgn {
            order: cfg.channel.order,
        },
    })
}

/// Sweeps each checkpoint over `grid` and writes one CSV with all rows.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    checkpoints: &[PathBuf],
    grid: Option<&[f64]>,
    seeds: Option<&[u64]>,
    out: &Path,
) -> Result<SweepResult> {
    let resolved = cfg.resolve()?;
    let splits = load_splits(cfg, &resolved)?;
    let chan = sweep_channel(cfg)?;
    let grid = grid.unwrap_or(&resolved.grid);
    let seeds = seeds.unwrap_or(&cfg.seeds);
    let mut all = SweepResult::default();
    for path in checkpoints {
        let ckpt = Checkpoint::load(path)?;
        all.records.extend(snr_sweep(&ckpt, grid, seeds, &chan, &splits.test)?.records);
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    export_csv(&all, fs::File::create(out)?)?;
    Ok(all)
}

pub fn print_summary<W: Write>(result: &SweepResult, mut w: W) -> Result<()> {
    writeln!(w, "{:<16} {:>8} {:>10} {:>8} {:>6}", "variant", "snr_db", "psnr_db", "std", "seeds")?;
    for r in summarize(result) {
        writeln!(
            w,
            "{:<16} {:>8.2} {:>10.4} {:>8.4} {:>6}",
            r.variant, r.snr_db, r.mean_db, r.std_db, r.seeds
        )?;
    }
    Ok(())
}

pub fn cmd_ber_table(grid: &[f64], n_bits: u64, order: u32, seed: u64, out: &Path) -> Result<()> {
    if n_bits < MIN_BITS {
        return Err(Error::config(format!("--bits: need at least {MIN_BITS}, got {n_bits}")));
    }
    let rows = ber_table(order, grid, n_bits, seed)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_ber_csv(&rows, fs::File::create(out)?)
}
