//! Bit channels: the binary symmetric abstraction and the full QAM/AWGN path.

use rand::Rng;

use super::convert::BitFrame;
use super::qam::{awgn, Qam};
use super::snr::SnrTable;
use crate::error::{Error, Result};

/// Draws the flip indicators `1{u < p}`, `u ~ U[0,1)`, one per bit.
pub fn flip_mask<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| (rng.random::<f64>() < p) as u8).collect()
}

/// XORs per-bit flip indicators into the frame.
pub fn apply_flips(frame: &BitFrame, mask: &[u8]) -> Result<BitFrame> {
    if mask.len() != frame.bits().len() {
        return Err(Error::Shape(format!(
            "flip mask of {} for a frame of {} bits",
            mask.len(),
            frame.bits().len()
        )));
    }
    let bits = frame.bits().iter().zip(mask).map(|(b, m)| b ^ m).collect();
    BitFrame::new(bits, frame.bits_per_symbol())
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=0.5).contains(&p) {
        Ok(())
    } else {
        Err(Error::Contract(format!("flip probability {p} outside [0, 0.5]")))
    }
}

/// Flips each bit independently with probability `p`.
pub fn bsc_flip<R: Rng + ?Sized>(frame: &BitFrame, p: f64, rng: &mut R) -> Result<BitFrame> {
    check_p(p)?;
    let mask = flip_mask(frame.bits().len(), p, rng);
    apply_flips(frame, &mask)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Noiseless,
    Bsc { p: f64 },
    QamAwgn { qam: Qam, snr_db: f64 },
}

impl Channel {
    pub fn bsc(p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Channel::Bsc { p })
    }

    pub fn qam_awgn(order: u32, snr_db: f64) -> Result<Self> {
        Ok(Channel::QamAwgn {
            qam: Qam::new(order)?,
            snr_db,
        })
    }

    /// BSC at the flip probability the table assigns to `snr_db`.
    pub fn bsc_at_snr(table: &SnrTable, snr_db: f64) -> Result<Self> {
        Self::bsc(table.snr_to_p(snr_db)?)
    }

    pub fn transmit<R: Rng + ?Sized>(&self, frame: &BitFrame, rng: &mut R) -> Result<BitFrame> {
        match self {
            Channel::Noiseless => Ok(frame.clone()),
            Channel::Bsc { p } => bsc_flip(frame, *p, rng),
            Channel::QamAwgn { qam, snr_db } => {
                let tx = qam.modulate(frame);
                let rx = awgn(&tx, qam, *snr_db, rng);
                qam.demodulate(&rx, frame)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Channel::Noiseless => "noiseless",
            Channel::Bsc { .. } => "bsc",
            Channel::QamAwgn { .. } => "qam_awgn",
        }
    }
}
