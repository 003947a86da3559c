//! Monte Carlo bit error rate estimation and the BER report schema.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::channel::Channel;
use super::convert::BitFrame;
use super::snr::analytic_ber;
use crate::error::{Error, Result};
use crate::rng;

pub const MIN_BITS: u64 = 10_000;
const Z95: f64 = 1.959_963_984_540_054;
const CHUNK_BITS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    pub n_bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval at `z`.
pub fn wilson_interval(errors: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if errors as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

impl BerEstimate {
    pub fn from_counts(errors: u64, n_bits: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, n_bits, Z95);
        Self {
            n_bits,
            errors,
            ber: errors as f64 / n_bits as f64,
            ci_low,
            ci_high,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.ci_low && p <= self.ci_high
    }
}

/// Pushes `n_bits` uniformly random bits through `channel` and counts errors.
pub fn estimate_ber<R: Rng + ?Sized>(channel: &Channel, n_bits: u64, rng: &mut R) -> Result<BerEstimate> {
    if n_bits < MIN_BITS {
        return Err(Error::Contract(format!(
            "BER estimation needs at least {MIN_BITS} bits, got {n_bits}"
        )));
    }
    let mut errors = 0u64;
    let mut remaining = n_bits as usize;
    while remaining > 0 {
        let len = remaining.min(CHUNK_BITS);
        let bits: Vec<u8> = (0..len).map(|_| rng.random::<bool>() as u8).collect();
        let frame = BitFrame::new(bits, 1)?;
        let rx = channel.transmit(&frame, rng)?;
        errors += frame
            .bits()
            .iter()
            .zip(rx.bits())
            .filter(|(a, b)| a != b)
            .count() as u64;
        remaining -= len;
    }
    Ok(BerEstimate::from_counts(errors, n_bits))
}

/// One row of a BER report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRow {
    pub snr_db: f64,
    pub mode: String,
    pub n_bits: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Monte Carlo (`qam_awgn`) and closed-form (`analytic`) rows for each SNR.
pub fn ber_table(order: u32, grid: &[f64], n_bits: u64, seed: u64) -> Result<Vec<BerRow>> {
    let mut rows = Vec::with_capacity(grid.len() * 2);
    for (i, &snr) in grid.iter().enumerate() {
        let ch = Channel::qam_awgn(order, snr)?;
        let est = estimate_ber(&ch, n_bits, &mut rng::stream(seed, &[rng::tag::CHANNEL, i as u64]))?;
        rows.push(BerRow {
            snr_db: snr,
            mode: "qam_awgn".into(),
            n_bits,
            ber: est.ber,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
        });
        let a = analytic_ber(order, snr)?;
        rows.push(BerRow {
            snr_db: snr,
            mode: "analytic".into(),
            n_bits: 0,
            ber: a,
            ci_low: a,
            ci_high: a,
        });
    }
    Ok(rows)
}

pub fn write_ber_csv<W: Write>(rows: &[BerRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["snr_db", "mode", "n_bits", "ber", "ci_low", "ci_high"])?;
    for r in rows {
        w.write_record([
            format!("{:.3}", r.snr_db),
            r.mode.clone(),
            r.n_bits.to_string(),
            format!("{:.6e}", r.ber),
            format!("{:.6e}", r.ci_low),
            format!("{:.6e}", r.ci_high),
        ])?;
    }
    w.flush()?;
    Ok(())
}
