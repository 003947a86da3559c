use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source-to-feature compression: one transmitted symbol per six source values.
pub const COMPRESSION_DIVISOR: usize = 6;

/// Shapes of the encoder, decoder and restorer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Flattened source size `c·h·w`.
    pub input_dim: usize,
    /// Transmitted continuous symbols `n`.
    pub feature_dim: usize,
    /// Bits per quantized symbol `b`.
    pub bits: u32,
    pub encoder_blocks: usize,
    pub decoder_blocks: usize,
    /// Squeeze-and-excitation gates per codec network (after the first blocks).
    pub se_blocks: usize,
    pub hidden: usize,
    /// Channel groups used by the SE gates; must divide `hidden`.
    pub se_channels: usize,
    pub se_reduction: usize,
    /// Output widths of the restorer's contracting path, outermost first.
    pub restorer_widths: Vec<usize>,
    /// Start the restorer as the identity map.
    pub restorer_zero_head: bool,
}

impl ModelConfig {
    /// Defaults for a source of `input_dim` values at `bits` per symbol.
    pub fn for_input(input_dim: usize, bits: u32) -> Self {
        Self {
            input_dim,
            feature_dim: (input_dim / COMPRESSION_DIVISOR).max(1),
            bits,
            encoder_blocks: 3,
            decoder_blocks: 3,
            se_blocks: 2,
            hidden: 64,
            se_channels: 8,
            se_reduction: 2,
            restorer_widths: vec![64, 48, 32, 24, 16],
            restorer_zero_head: true,
        }
    }

    pub fn levels(&self) -> f64 {
        ((1u32 << self.bits) - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.input_dim == 0 {
            errs.push("model.input_dim: must be positive".to_string());
        }
        if self.feature_dim == 0 {
            errs.push("model.feature_dim: must be positive".to_string());
        }
        if !(1..=8).contains(&self.bits) {
            errs.push(format!("model.bits: must be in 1..=8, got {}", self.bits));
        }
        if self.encoder_blocks == 0 || self.decoder_blocks == 0 {
            errs.push("model.encoder_blocks/decoder_blocks: need at least one block".to_string());
        }
        if self.se_blocks > self.encoder_blocks.min(self.decoder_blocks) {
            errs.push(format!(
                "model.se_blocks: {} exceeds block count {}",
                self.se_blocks,
                self.encoder_blocks.min(self.decoder_blocks)
            ));
        }
        if self.hidden == 0 {
            errs.push("model.hidden: must be positive".to_string());
        }
        if self.se_channels == 0 || self.hidden % self.se_channels.max(1) != 0 {
            errs.push(format!(
                "model.se_channels: {} must be positive and divide hidden width {}",
                self.se_channels, self.hidden
            ));
        }
        if self.se_reduction == 0 || self.se_channels / self.se_reduction.max(1) == 0 {
            errs.push("model.se_reduction: must leave at least one squeezed unit".to_string());
        }
        if self.restorer_widths.is_empty() || self.restorer_widths.contains(&0) {
            errs.push("model.restorer_widths: need one or more positive widths".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_geometry_hits_one_sixth() {
        let c = ModelConfig::for_input(3 * 8 * 8, 4);
        assert_eq!(c.feature_dim, 32);
        assert_eq!(c.levels(), 15.0);
        c.validate().unwrap();
    }

    #[test]
    fn tiny_inputs_keep_one_feature() {
        assert_eq!(ModelConfig::for_input(5, 2).feature_dim, 1);
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut c = ModelConfig::for_input(192, 9);
        c.se_channels = 7;
        c.restorer_widths.clear();
        match c.validate() {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 3, "{errs:?}"),
            other => panic!("{other:?}"),
        }
    }
}
