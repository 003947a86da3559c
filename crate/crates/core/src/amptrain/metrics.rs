use std::io::Write;

use crate::error::Result;

/// One epoch of a training log.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub phase: String,
    pub step: u8,
    pub round: usize,
    /// 1-based within the phase.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_psnr: Option<f64>,
}

pub const METRICS_HEADER: [&str; 7] = ["phase", "step", "round", "epoch", "lr", "train_loss", "val_psnr"];

/// `val_psnr` is empty on epochs without validation.
pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.phase.clone(),
            r.step.to_string(),
            r.round.to_string(),
            r.epoch.to_string(),
            format!("{:.6e}", r.lr),
            format!("{:.8}", r.train_loss),
            r.val_psnr.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
