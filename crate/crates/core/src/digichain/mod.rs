//! The non-differentiable middle of the link: quantizer, converters,
//! modulation, and bit channels.

mod ber;
mod channel;
mod convert;
mod qam;
mod snr;

pub use ber::{ber_table, estimate_ber, wilson_interval, write_ber_csv, BerEstimate, BerRow, MIN_BITS};
pub use channel::{apply_flips, bsc_flip, flip_mask, Channel};
pub use convert::{ad_convert, da_convert, da_symbols, max_level, quantize, BitFrame, QuantizedFrame, RANGE_SLACK};
pub use qam::{awgn, gray_decode, gray_encode, Qam};
pub use snr::{analytic_ber, approx_ber_16qam, q_function, SnrTable, REFERENCE_16QAM};

use rand::Rng;

use crate::error::Result;

/// Quantize, convert to bits, send through `channel`, convert back.
/// Returns `(⌈x̃⌋, ž)` as reals.
pub fn transmit_features<R: Rng + ?Sized>(
    features: &[f64],
    bits: u32,
    channel: &Channel,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = quantize(features, bits)?;
    let tx = ad_convert(&q);
    let rx = channel.transmit(&tx, rng)?;
    Ok((q.to_f64(), da_convert(&rx)))
}
