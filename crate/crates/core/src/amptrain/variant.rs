use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schedule::{StepBudget, TrainingSchedule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepKind {
    /// Analog end-to-end feature extraction.
    Extract,
    /// Analog training with Gaussian noise in place of rounding.
    SoftQuant,
    /// Digital chain with the encoder frozen, optionally masked.
    DecoderOnly,
    /// Analog joint training with noise and mask.
    Joint,
    /// Digital chain with the encoder frozen and no mask.
    Align,
}

impl StepKind {
    pub fn number(self) -> u8 {
        match self {
            StepKind::Extract => 1,
            StepKind::SoftQuant => 2,
            StepKind::DecoderOnly => 3,
            StepKind::Joint => 4,
            StepKind::Align => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StepKind::Extract => "extract",
            StepKind::SoftQuant => "softq",
            StepKind::DecoderOnly => "decoder_only",
            StepKind::Joint => "joint",
            StepKind::Align => "align",
        }
    }

    pub fn encoder_frozen(self) -> bool {
        matches!(self, StepKind::DecoderOnly | StepKind::Align)
    }

    pub fn digital(self) -> bool {
        self.encoder_frozen()
    }
}

/// One scheduled training step of a pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: StepKind,
    /// Alternating round, 1-based; 0 outside the rounds.
    pub round: usize,
    pub budget: StepBudget,
    pub mask_ratio: f64,
    pub restorer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PipelineVariant {
    #[serde(rename = "AMP_SC")]
    AmpSc,
    SoftAMP,
    SoftQ,
    He22,
    SoftHe22,
    #[serde(rename = "SoftAMP_noMATK")]
    SoftAmpNoMatk,
    #[serde(rename = "SoftHe22_wMATK")]
    SoftHe22WMatk,
    Conventional,
}

impl PipelineVariant {
    pub const ALL: [PipelineVariant; 8] = [
        PipelineVariant::AmpSc,
        PipelineVariant::SoftAMP,
        PipelineVariant::SoftQ,
        PipelineVariant::He22,
        PipelineVariant::SoftHe22,
        PipelineVariant::SoftAmpNoMatk,
        PipelineVariant::SoftHe22WMatk,
        PipelineVariant::Conventional,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipelineVariant::AmpSc => "AMP_SC",
            PipelineVariant::SoftAMP => "SoftAMP",
            PipelineVariant::SoftQ => "SoftQ",
            PipelineVariant::He22 => "He22",
            PipelineVariant::SoftHe22 => "SoftHe22",
            PipelineVariant::SoftAmpNoMatk => "SoftAMP_noMATK",
            PipelineVariant::SoftHe22WMatk => "SoftHe22_wMATK",
            PipelineVariant::Conventional => "Conventional",
        }
    }

    pub fn has_restorer(self) -> bool {
        self == PipelineVariant::AmpSc
    }

    /// Conventional is deployed without quantization or bit errors.
    pub fn analog_eval(self) -> bool {
        self == PipelineVariant::Conventional
    }

    /// The ordered steps this variant trains with.
    pub fn plan(self, s: &TrainingSchedule) -> Result<Vec<Phase>> {
        s.validate()?;
        let phase = |kind, round, budget, mask_ratio, restorer| Phase {
            kind,
            round,
            budget,
            mask_ratio,
            restorer,
        };
        let extract = phase(StepKind::Extract, 0, s.step1, 0.0, false);
        let softq = phase(StepKind::SoftQuant, 0, s.step2, 0.0, false);
        let regular = |b: StepBudget| StepBudget::new(s.t, b.lr);
        let mut out = vec![extract];
        match self {
            PipelineVariant::Conventional => {}
            PipelineVariant::SoftQ => out.push(softq),
            PipelineVariant::He22 => out.push(phase(StepKind::Align, 0, s.step5, 0.0, false)),
            PipelineVariant::SoftHe22 => {
                out.push(softq);
                out.push(phase(StepKind::Align, 0, s.step5, 0.0, false));
            }
            PipelineVariant::SoftHe22WMatk => {
                out.push(softq);
                out.push(phase(StepKind::Align, 0, s.step5, s.mask_ratio, false));
            }
            PipelineVariant::AmpSc | PipelineVariant::SoftAMP | PipelineVariant::SoftAmpNoMatk => {
                let restorer = self.has_restorer();
                let ratio = if self == PipelineVariant::SoftAmpNoMatk { 0.0 } else { s.mask_ratio };
                out.push(softq);
                for r in 0..s.rounds {
                    let (b3, b4) = if restorer {
                        (s.step3[r], s.step4[r])
                    } else {
                        (regular(s.step3[r]), regular(s.step4[r]))
                    };
                    out.push(phase(StepKind::DecoderOnly, r + 1, b3, ratio, restorer));
                    out.push(phase(StepKind::Joint, r + 1, b4, ratio, restorer));
                }
                out.push(phase(StepKind::Align, 0, s.step5, 0.0, restorer));
            }
        }
        Ok(out)
    }
}

impl fmt::Display for PipelineVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        PipelineVariant::ALL
            .into_iter()
            .find(|v| v.name().to_ascii_lowercase().replace('_', "") == key)
            .ok_or_else(|| {
                let names: Vec<_> = PipelineVariant::ALL.iter().map(|v| v.name()).collect();
                Error::config(format!("variant: unknown {s:?}, expected one of {}", names.join(", ")))
            })
    }
}
