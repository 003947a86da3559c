//! Gray-labelled square QAM with hard-decision demodulation over AWGN.
//!
//! Labelling: a point's `log2(M)` bits split in half, the leading half is the
//! Gray label of the in-phase level and the trailing half that of the
//! quadrature level. Level position `j` on an axis with `L` levels sits at
//! amplitude `(L - 1 - 2j) · scale`, so label 0 is the most positive level;
//! QPSK `00` maps to `(+1/√2, +1/√2)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::convert::BitFrame;
use crate::error::{Error, Result};

pub fn gray_encode(k: u32) -> u32 {
    k ^ (k >> 1)
}

pub fn gray_decode(g: u32) -> u32 {
    let mut k = g;
    let mut shift = g >> 1;
    while shift != 0 {
        k ^= shift;
        shift >>= 1;
    }
    k
}

#[derive(Debug, Clone, PartialEq)]
pub struct Qam {
    order: u32,
    bits_per_axis: u32,
    levels: u32,
    scale: f64,
}

impl Qam {
    /// Square constellation with `order ∈ {4, 16, 64, 256}`.
    pub fn new(order: u32) -> Result<Self> {
        if !matches!(order, 4 | 16 | 64 | 256) {
            return Err(Error::Contract(format!(
                "modulation order must be an even power of two (4, 16, 64, 256), got {order}"
            )));
        }
        let bits = order.trailing_zeros();
        let levels = 1u32 << (bits / 2);
        // mean of (L-1-2j)^2 over j, twice (I and Q) = 2(L²-1)/3
        let es = 2.0 * ((levels * levels - 1) as f64) / 3.0;
        Ok(Self {
            order,
            bits_per_axis: bits / 2,
            levels,
            scale: 1.0 / es.sqrt(),
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn bits_per_point(&self) -> u32 {
        2 * self.bits_per_axis
    }

    fn amplitude(&self, position: u32) -> f64 {
        (self.levels as f64 - 1.0 - 2.0 * position as f64) * self.scale
    }

    /// Constellation point for label `k < M`.
    pub fn point(&self, label: u32) -> Result<Complex64> {
        if label >= self.order {
            return Err(Error::Contract(format!("label {label} outside {}-QAM", self.order)));
        }
        let gi = label >> self.bits_per_axis;
        let gq = label & (self.levels - 1);
        Ok(Complex64::new(
            self.amplitude(gray_decode(gi)),
            self.amplitude(gray_decode(gq)),
        ))
    }

    /// Nearest level on one axis; ties go to the smaller Gray label.
    fn slice_axis(&self, r: f64) -> u32 {
        let l = self.levels;
        let t = ((l as f64 - 1.0) - r / self.scale) / 2.0;
        let lo = (t.floor().max(0.0) as u32).min(l - 2);
        let hi = lo + 1;
        let d_lo = (r - self.amplitude(lo)).abs();
        let d_hi = (r - self.amplitude(hi)).abs();
        let (g_lo, g_hi) = (gray_encode(lo), gray_encode(hi));
        if d_lo < d_hi || (d_lo == d_hi && g_lo < g_hi) {
            g_lo
        } else {
            g_hi
        }
    }

    /// Maximum-likelihood hard decision: nearest point, ties toward the lower
    /// label. On a square grid the decision separates per axis.
    pub fn decide(&self, y: Complex64) -> u32 {
        (self.slice_axis(y.re) << self.bits_per_axis) | self.slice_axis(y.im)
    }

    /// Groups the frame's bits `log2(M)` at a time in frame order, padding the
    /// tail with zeros.
    pub fn modulate_bits(&self, bits: &[u8]) -> Vec<Complex64> {
        let k = self.bits_per_point() as usize;
        bits.chunks(k)
            .map(|chunk| {
                let mut label = 0u32;
                for i in 0..k {
                    label = (label << 1) | chunk.get(i).copied().unwrap_or(0) as u32;
                }
                self.point(label).expect("label within order")
            })
            .collect()
    }

    /// Inverse of `modulate_bits`, dropping the padding beyond `n_bits`.
    pub fn demodulate_bits(&self, symbols: &[Complex64], n_bits: usize) -> Result<Vec<u8>> {
        let k = self.bits_per_point() as usize;
        if symbols.len() != n_bits.div_ceil(k) {
            return Err(Error::Shape(format!(
                "{} symbols cannot carry {n_bits} bits at {k} bits/symbol",
                symbols.len()
            )));
        }
        let mut out = Vec::with_capacity(symbols.len() * k);
        for &y in symbols {
            let label = self.decide(y);
            for i in (0..k).rev() {
                out.push(((label >> i) & 1) as u8);
            }
        }
        out.truncate(n_bits);
        Ok(out)
    }

    pub fn modulate(&self, frame: &BitFrame) -> Vec<Complex64> {
        self.modulate_bits(frame.bits())
    }

    pub fn demodulate(&self, symbols: &[Complex64], template: &BitFrame) -> Result<BitFrame> {
        BitFrame::new(
            self.demodulate_bits(symbols, template.bits().len())?,
            template.bits_per_symbol(),
        )
    }

    /// Per-dimension noise standard deviation at `Eb/N0 = snr_db` with unit
    /// symbol energy: `N0 = 1 / (log2(M) · 10^(snr/10))`, `σ² = N0/2`.
    pub fn noise_sigma(&self, snr_db: f64) -> f64 {
        let ebn0 = 10f64.powf(snr_db / 10.0);
        let n0 = 1.0 / (self.bits_per_point() as f64 * ebn0);
        (n0 / 2.0).sqrt()
    }
}

/// Adds circular complex Gaussian noise for `Eb/N0 = snr_db`.
pub fn awgn<R: Rng + ?Sized>(symbols: &[Complex64], qam: &Qam, snr_db: f64, rng: &mut R) -> Vec<Complex64> {
    let sigma = qam.noise_sigma(snr_db);
    symbols
        .iter()
        .map(|s| {
            let nr: f64 = rng.sample(StandardNormal);
            let ni: f64 = rng.sample(StandardNormal);
            s + Complex64::new(sigma * nr, sigma * ni)
        })
        .collect()
}
