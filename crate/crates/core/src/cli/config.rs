//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::amptrain::{PipelineVariant, StepBudget, TrainingSchedule, DEFAULT_ALPHA, DEFAULT_P};
use crate::dataset::{Generator, SyntheticSpec};
use crate::error::{Error, Result};
use crate::semcodec::{ModelConfig, COMPRESSION_DIVISOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// File written by `gen-data` and read by `train`/`eval`.
    pub path: PathBuf,
    pub count: usize,
    #[serde(default = "default_c")]
    pub c: usize,
    #[serde(default = "default_hw")]
    pub h: usize,
    #[serde(default = "default_hw")]
    pub w: usize,
    #[serde(default = "default_generator")]
    pub generator: Generator,
    #[serde(default)]
    pub seed: u64,
    /// Leading samples held out for testing.
    pub test_count: usize,
    /// Samples after the test split used for validation.
    pub val_count: usize,
}

fn default_c() -> usize {
    3
}
fn default_hw() -> usize {
    8
}
fn default_generator() -> Generator {
    Generator::Mix
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub bits: u32,
    pub feature_dim: Option<usize>,
    pub hidden: Option<usize>,
    pub encoder_blocks: Option<usize>,
    pub decoder_blocks: Option<usize>,
    pub se_blocks: Option<usize>,
    pub se_channels: Option<usize>,
    pub se_reduction: Option<usize>,
    pub restorer_widths: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub t: usize,
    pub batch_size: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Defaults to `2p`.
    pub mask_ratio: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Multiplies every learning rate.
    pub lr_scale: Option<f64>,
    pub step1: Option<StepBudget>,
    pub step2: Option<StepBudget>,
    pub step3: Option<Vec<StepBudget>>,
    pub step4: Option<Vec<StepBudget>>,
    pub step5: Option<StepBudget>,
}

fn default_p() -> f64 {
    DEFAULT_P
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    Bsc,
    QamAwgn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub mode: ChannelMode,
    #[serde(default = "default_order")]
    pub order: u32,
    /// `snr_db,p` table; the built-in 16-QAM table when absent.
    pub snr_table: Option<PathBuf>,
    /// Evaluation grid, e.g. `"0:18:1"` or `"0,5,10"`.
    pub eval_grid: String,
}

fn default_order() -> u32 {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variants: Vec<String>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub schedule: ScheduleSection,
    pub channel: ChannelSection,
}

/// Parses a grid spec: `start:stop:step` (inclusive) or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::config(format!("snr grid {spec:?}: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("{s:?} is not a number")));
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("range needs start:stop:step"));
        }
        let (a, b, s) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(s > 0.0) || b < a {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let n = ((b - a) / s + 1e-9).floor() as usize;
        // round to micro-dB so 0.1-step grids land on their decimal values
        (0..=n).map(|i| ((a + i as f64 * s) * 1e6).round() / 1e6).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("values must be strictly ascending"));
    }
    Ok(grid)
}

/// Validated, resolved view of a config.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub variants: Vec<PipelineVariant>,
    pub model: ModelConfig,
    pub schedule: TrainingSchedule,
    pub data: SyntheticSpec,
    pub grid: Vec<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string().trim_end().to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(errs) => Error::Config(errs.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Checks every field and reports all problems at once.
    pub fn resolve(&self) -> Result<Resolved> {
        let mut errs = Vec::new();
        let mut variants = Vec::new();
        if self.variants.is_empty() {
            errs.push("variants: list is empty".to_string());
        }
        for v in &self.variants {
            match v.parse::<PipelineVariant>() {
                Ok(v) => variants.push(v),
                Err(Error::Config(m)) => errs.extend(m),
                Err(e) => errs.push(e.to_string()),
            }
        }
        if self.seeds.is_empty() {
            errs.push("seeds: list is empty".to_string());
        }
        let d = &self.dataset;
        if d.c * d.h * d.w == 0 {
            errs.push(format!("dataset.c/h/w: geometry {}x{}x{} is empty", d.c, d.h, d.w));
        }
        if d.test_count + d.val_count >= d.count {
            errs.push(format!(
                "dataset.count: {} leaves no training samples after test_count {} and val_count {}",
                d.count, d.test_count, d.val_count
            ));
        }
        if d.test_count == 0 {
            errs.push("dataset.test_count: must be positive".to_string());
        }
        if d.val_count == 0 {
            errs.push("dataset.val_count: must be positive".to_string());
        }
        let input_dim = d.c * d.h * d.w;
        let m = &self.model;
        let mut model = ModelConfig::for_input(input_dim, m.bits);
        model.feature_dim = m.feature_dim.unwrap_or((input_dim / COMPRESSION_DIVISOR).max(1));
        if let Some(v) = m.hidden {
            model.hidden = v;
        }
        if let Some(v) = m.encoder_blocks {
            model.encoder_blocks = v;
        }
        if let Some(v) = m.decoder_blocks {
            model.decoder_blocks = v;
        }
        if let Some(v) = m.se_blocks {
            model.se_blocks = v;
        }
        if let Some(v) = m.se_channels {
            model.se_channels = v;
        }
        if let Some(v) = m.se_reduction {
            model.se_reduction = v;
        }
        if let Some(v) = &m.restorer_widths {
            model.restorer_widths = v.clone();
        }
        if let Err(Error::Config(e)) = model.validate() {
            errs.extend(e);
        }
        let s = &self.schedule;
        let mut schedule = TrainingSchedule::reference(s.t, s.batch_size).with_p(s.p);
        schedule.alpha = s.alpha;
        if let Some(r) = s.mask_ratio {
            schedule.mask_ratio = r;
        }
        if let Some(b) = s.step1 {
            schedule.step1 = b;
        }
        if let Some(b) = s.step2 {
            schedule.step2 = b;
        }
        if let Some(b) = s.step5 {
            schedule.step5 = b;
        }
        match (&s.step3, &s.step4) {
            (Some(a), Some(b)) => {
                schedule.step3 = a.clone();
                schedule.step4 = b.clone();
                schedule.rounds = a.len();
            }
            (None, None) => {}
            _ => errs.push("schedule.step3/step4: give both round lists or neither".to_string()),
        }
        if let Some(k) = s.lr_scale {
            if k > 0.0 && k.is_finite() {
                schedule = schedule.scale_lr(k);
            } else {
                errs.push(format!("schedule.lr_scale: {k} must be positive"));
            }
        }
        if let Err(Error::Config(e)) = schedule.validate() {
            errs.extend(e);
        }
        let c = &self.channel;
        if c.mode == ChannelMode::QamAwgn && !matches!(c.order, 4 | 16 | 64 | 256) {
            errs.push(format!("channel.order: {} is not 4, 16, 64 or 256", c.order));
        }
        let grid = match parse_grid(&c.eval_grid) {
            Ok(g) => g,
            Err(Error::Config(e)) => {
                errs.extend(e.into_iter().map(|m| format!("channel.eval_grid: {m}")));
                Vec::new()
            }
            Err(e) => return Err(e),
        };
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(Resolved {
            variants,
            model,
            schedule,
            data: SyntheticSpec {
                count: d.count,
                c: d.c,
                h: d.h,
                w: d.w,
                generator: d.generator,
                seed: d.seed,
            },
            grid,
        })
    }
}
