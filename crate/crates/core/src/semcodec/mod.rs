//! Learned encoder, decoder and feature restorer.

mod checkpoint;
mod config;
mod layers;
mod nets;

pub use checkpoint::{sha256_hex, Checkpoint, MAGIC, VERSION};
pub use config::{ModelConfig, COMPRESSION_DIVISOR};
pub use layers::{Linear, ParamBuilder, ParamSet, ResidualBlock, SeGate};
pub use nets::{Decoder, Encoder, Networks, Restorer, DECODER_SET, ENCODER_SET, RESTORER_SET};
