use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBudget {
    pub epochs: usize,
    pub lr: f64,
}

impl StepBudget {
    pub fn new(epochs: usize, lr: f64) -> Self {
        Self { epochs, lr }
    }
}

/// Epoch budgets, learning rates and noise settings of the five steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub t: usize,
    pub step1: StepBudget,
    pub step2: StepBudget,
    /// One entry per alternating round.
    pub step3: Vec<StepBudget>,
    pub step4: Vec<StepBudget>,
    pub step5: StepBudget,
    pub batch_size: usize,
    pub rounds: usize,
    /// Bit-flip probability of the training channel.
    pub p: f64,
    pub mask_ratio: f64,
    /// Standard deviation of the soft-quantization noise.
    pub alpha: f64,
}

pub const DEFAULT_P: f64 = 0.0125;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_ROUNDS: usize = 3;

impl TrainingSchedule {
    /// Reference budgets in units of `t` epochs.
    pub fn reference(t: usize, batch_size: usize) -> Self {
        let round_lrs = [1e-4, 1e-4, 1.5e-5];
        Self {
            t,
            step1: StepBudget::new(4 * t, 1e-4),
            step2: StepBudget::new(t, 1e-5),
            step3: [4 * t, t, t].iter().zip(round_lrs).map(|(&e, lr)| StepBudget::new(e, lr)).collect(),
            step4: round_lrs.iter().map(|&lr| StepBudget::new(t, lr)).collect(),
            step5: StepBudget::new(t, 1.5e-5),
            batch_size,
            rounds: DEFAULT_ROUNDS,
            p: DEFAULT_P,
            mask_ratio: 2.0 * DEFAULT_P,
            alpha: DEFAULT_ALPHA,
        }
    }

    /// Sets `p` and keeps the mask ratio tied at `2p`.
    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self.mask_ratio = 2.0 * p;
        self
    }

    /// Multiplies every learning rate by `k`.
    pub fn scale_lr(mut self, k: f64) -> Self {
        for b in self.budgets_mut() {
            b.lr *= k;
        }
        self
    }

    fn budgets_mut(&mut self) -> impl Iterator<Item = &mut StepBudget> {
        [&mut self.step1, &mut self.step2, &mut self.step5]
            .into_iter()
            .chain(self.step3.iter_mut())
            .chain(self.step4.iter_mut())
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.t == 0 {
            errs.push("schedule.t: must be positive".to_string());
        }
        if self.batch_size == 0 {
            errs.push("schedule.batch_size: must be positive".to_string());
        }
        if self.rounds == 0 {
            errs.push("schedule.rounds: must be positive".to_string());
        }
        if self.step3.len() != self.rounds {
            errs.push(format!("schedule.step3: {} entries for {} rounds", self.step3.len(), self.rounds));
        }
        if self.step4.len() != self.rounds {
            errs.push(format!("schedule.step4: {} entries for {} rounds", self.step4.len(), self.rounds));
        }
        let all = [self.step1, self.step2, self.step5]
            .into_iter()
            .chain(self.step3.iter().copied())
            .chain(self.step4.iter().copied());
        if all.clone().any(|b| b.epochs == 0) {
            errs.push("schedule: every step needs at least one epoch".to_string());
        }
        if all.clone().any(|b| !(b.lr > 0.0 && b.lr.is_finite())) {
            errs.push("schedule: learning rates must be positive and finite".to_string());
        }
        if !(0.0..0.5).contains(&self.p) {
            errs.push(format!("schedule.p: {} outside [0, 0.5)", self.p));
        }
        if !(0.0..1.0).contains(&self.mask_ratio) {
            errs.push(format!("schedule.mask_ratio: {} outside [0, 1)", self.mask_ratio));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            errs.push(format!("schedule.alpha: {} must be finite and non-negative", self.alpha));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Epochs of Step 1, Step 2, all rounds and Step 5.
    pub fn total_epochs(&self) -> usize {
        self.step1.epochs
            + self.step2.epochs
            + self.step3.iter().map(|b| b.epochs).sum::<usize>()
            + self.step4.iter().map(|b| b.epochs).sum::<usize>()
            + self.step5.epochs
    }
}
