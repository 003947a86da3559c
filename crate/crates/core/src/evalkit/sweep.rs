use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::amptrain::{reconstruct, EvalPath, PipelineVariant};
use crate::dataset::Dataset;
use crate::digichain::{analytic_ber, Channel, SnrTable};
use crate::error::{Error, Result};
use crate::evalkit::psnr_tensor;
use crate::rng::{self, tag};
use crate::semcodec::Checkpoint;

pub const SWEEP_HEADER: [&str; 6] = ["variant", "snr_db", "p", "seed", "psnr_db", "n_samples"];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub variant: String,
    pub snr_db: f64,
    /// Bit-flip probability at `snr_db`; 0 for analog evaluation.
    pub p: f64,
    pub seed: u64,
    /// `inf` marks an exact reconstruction.
    pub psnr_db: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub records: Vec<MetricRecord>,
}

/// How an SNR grid point is turned into bit errors.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepChannel {
    /// BSC at the flip probability the table assigns to each SNR.
    Bsc(SnrTable),
    /// Full modulation and AWGN.
    QamAwgn { order: u32 },
}

impl SweepChannel {
    fn at(&self, snr_db: f64) -> Result<(Channel, f64)> {
        match self {
            SweepChannel::Bsc(table) => {
                let p = table.snr_to_p(snr_db)?;
                Ok((Channel::bsc(p)?, p))
            }
            SweepChannel::QamAwgn { order } => Ok((Channel::qam_awgn(*order, snr_db)?, analytic_ber(*order, snr_db)?)),
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Contract("empty SNR grid".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract(format!("SNR grid must be finite and strictly ascending: {grid:?}")));
    }
    Ok(())
}

/// PSNR on `test` at every grid point and evaluation seed.
pub fn snr_sweep(ckpt: &Checkpoint, grid: &[f64], seeds: &[u64], chan: &SweepChannel, test: &Dataset) -> Result<SweepResult> {
    check_grid(grid)?;
    if test.dim() != ckpt.networks.config.input_dim {
        return Err(Error::Contract(format!(
            "test samples have {} values, checkpoint expects {}",
            test.dim(),
            ckpt.networks.config.input_dim
        )));
    }
    let analog = ckpt
        .variant
        .parse::<PipelineVariant>()
        .map(PipelineVariant::analog_eval)
        .unwrap_or(false);
    let x = test.all();
    let mut records = Vec::with_capacity(grid.len() * seeds.len());
    for (gi, &snr) in grid.iter().enumerate() {
        let (ch, p) = chan.at(snr)?;
        let (path, p) = if analog { (EvalPath::Analog, 0.0) } else { (EvalPath::Digital(ch), p) };
        for &seed in seeds {
            let mut r = rng::stream(seed, &[tag::EVAL, gi as u64]);
            let y = reconstruct(&ckpt.networks, &x, &path, &mut r)?;
            records.push(MetricRecord {
                variant: ckpt.variant.clone(),
                snr_db: snr,
                p,
                seed,
                psnr_db: psnr_tensor(&y, &x)?,
                n_samples: test.len(),
            });
        }
    }
    Ok(SweepResult { records })
}

/// Mean, sample standard deviation and count of PSNR per variant and SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub snr_db: f64,
    pub mean_db: f64,
    pub std_db: f64,
    pub seeds: usize,
}

pub fn summarize(result: &SweepResult) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for r in &result.records {
        groups
            .entry((r.variant.clone(), r.snr_db.to_bits()))
            .or_default()
            .push(r.psnr_db);
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((variant, bits), v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                variant,
                snr_db: f64::from_bits(bits),
                mean_db: mean,
                std_db: std,
                seeds: v.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.variant.cmp(&b.variant).then(a.snr_db.total_cmp(&b.snr_db)));
    rows
}

fn fmt_real(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_real(s: &str, what: &str) -> Result<f64> {
    if s == "inf" {
        return Ok(f64::INFINITY);
    }
    s.parse().map_err(|_| Error::Format(format!("sweep csv: bad {what} {s:?}")))
}

/// Reals are written with 17 significant digits so parsing restores them
/// exactly.
pub fn export_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in &result.records {
        w.write_record([
            r.variant.clone(),
            fmt_real(r.snr_db),
            fmt_real(r.p),
            r.seed.to_string(),
            fmt_real(r.psnr_db),
            r.n_samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_csv<R: Read>(input: R) -> Result<SweepResult> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != SWEEP_HEADER {
        return Err(Error::Format(format!("sweep csv: header {header:?}")));
    }
    let mut records = Vec::new();
    for row in rd.records() {
        let row = row?;
        if row.len() != SWEEP_HEADER.len() {
            return Err(Error::Format(format!("sweep csv: row with {} fields", row.len())));
        }
        records.push(MetricRecord {
            variant: row[0].to_string(),
            snr_db: parse_real(&row[1], "snr_db")?,
            p: parse_real(&row[2], "p")?,
            seed: row[3].parse().map_err(|_| Error::Format(format!("sweep csv: bad seed {:?}", &row[3])))?,
            psnr_db: parse_real(&row[4], "psnr_db")?,
            n_samples: row[5]
                .parse()
                .map_err(|_| Error::Format(format!("sweep csv: bad n_samples {:?}", &row[5])))?,
        });
    }
    Ok(SweepResult { records })
}
