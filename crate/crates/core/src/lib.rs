//! Digital semantic communication: learned encoder/decoder/restorer trained
//! through a non-differentiable quantize → bits → QAM/BSC → bits chain.

pub mod amptrain;
pub mod autodiff;
pub mod cli;
pub mod dataset;
pub mod digichain;
pub mod error;
pub mod evalkit;
pub mod rng;
pub mod semcodec;

pub use error::{Error, Result};
