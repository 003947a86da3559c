//! PSNR, SNR sweeps and their CSV export.

mod metrics;
mod stats;
mod sweep;

pub use metrics::{is_exact, psnr, psnr_from_mse, psnr_tensor};
pub use stats::{paired_t_greater, PairedTest};
pub use sweep::{export_csv, parse_csv, snr_sweep, summarize, MetricRecord, SummaryRow, SweepChannel, SweepResult, SWEEP_HEADER};
