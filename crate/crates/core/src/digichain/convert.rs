//! Rounding quantizer and the symbol <-> bit converters.

use crate::error::{Error, Result};

/// Slack allowed above `2^b - 1` or below 0 before `quantize` refuses input.
pub const RANGE_SLACK: f64 = 1e-9;

pub fn max_level(bits: u32) -> u32 {
    (1u32 << bits) - 1
}

fn check_bits(bits: u32) -> Result<()> {
    if (1..=8).contains(&bits) {
        Ok(())
    } else {
        Err(Error::Contract(format!("bits per symbol must be in 1..=8, got {bits}")))
    }
}

/// Integer symbols, each in `[0, 2^b - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedFrame {
    symbols: Vec<u32>,
    bits: u32,
}

impl QuantizedFrame {
    pub fn new(symbols: Vec<u32>, bits: u32) -> Result<Self> {
        check_bits(bits)?;
        if symbols.is_empty() {
            return Err(Error::Contract("quantized frame must hold at least one symbol".into()));
        }
        let max = max_level(bits);
        if let Some(pos) = symbols.iter().position(|&s| s > max) {
            return Err(Error::Contract(format!(
                "symbol {} at {pos} exceeds {max} for b={bits}",
                symbols[pos]
            )));
        }
        Ok(Self { symbols, bits })
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.symbols.iter().map(|&s| s as f64).collect()
    }
}

/// `n` groups of `b` bits, most significant bit first within a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitFrame {
    bits: Vec<u8>,
    bits_per_symbol: u32,
}

impl BitFrame {
    pub fn new(bits: Vec<u8>, bits_per_symbol: u32) -> Result<Self> {
        check_bits(bits_per_symbol)?;
        if bits.len() % bits_per_symbol as usize != 0 {
            return Err(Error::Shape(format!(
                "{} bits do not split into groups of {bits_per_symbol}",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Contract("bit frame entries must be 0 or 1".into()));
        }
        Ok(Self { bits, bits_per_symbol })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.bits
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    pub fn symbol_count(&self) -> usize {
        self.bits.len() / self.bits_per_symbol as usize
    }

    pub fn group(&self, i: usize) -> &[u8] {
        let b = self.bits_per_symbol as usize;
        &self.bits[i * b..(i + 1) * b]
    }
}

/// Rounds half away from zero and clamps to `[0, 2^b - 1]`.
pub fn quantize(features: &[f64], bits: u32) -> Result<QuantizedFrame> {
    check_bits(bits)?;
    let max = max_level(bits) as f64;
    let mut symbols = Vec::with_capacity(features.len());
    for (i, &x) in features.iter().enumerate() {
        if !x.is_finite() || x < -RANGE_SLACK || x > max + RANGE_SLACK {
            return Err(Error::Contract(format!(
                "feature {i} = {x} outside quantizer range [0, {max}]"
            )));
        }
        symbols.push(x.round().clamp(0.0, max) as u32);
    }
    QuantizedFrame::new(symbols, bits)
}

/// `d_i = floor(s / 2^i) mod 2`, emitted as `d_{b-1} … d_0` per symbol.
pub fn ad_convert(q: &QuantizedFrame) -> BitFrame {
    let b = q.bits;
    let mut bits = Vec::with_capacity(q.len() * b as usize);
    for &s in &q.symbols {
        for i in (0..b).rev() {
            bits.push(((s >> i) & 1) as u8);
        }
    }
    BitFrame {
        bits,
        bits_per_symbol: b,
    }
}

/// `s = Σ d_i · 2^i` per group, as reals.
pub fn da_convert(frame: &BitFrame) -> Vec<f64> {
    da_symbols(frame).into_iter().map(|s| s as f64).collect()
}

pub fn da_symbols(frame: &BitFrame) -> Vec<u32> {
    frame
        .bits
        .chunks(frame.bits_per_symbol as usize)
        .map(|g| g.iter().fold(0u32, |acc, &d| (acc << 1) | d as u32))
        .collect()
}
