use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one ordered parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor], config: AdamConfig) -> Self {
        Self {
            config,
            first: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            second: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }

    /// One bias-corrected Adam step. `grads[i] == None` means the loss did not
    /// depend on parameter `i` and is treated as a zero gradient.
    ///
    /// Non-finite gradients abort the whole update before anything moves.
    pub fn update(&mut self, params: &mut [Tensor], grads: &[Option<&Tensor>], lr: f64) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Shape(format!(
                "adam: {} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        if !(lr > 0.0) {
            return Err(Error::Contract(format!("learning rate must be positive, got {lr}")));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if !p.same_shape(&self.first[i]) {
                return Err(Error::Shape(format!(
                    "adam: parameter {i} has shape {:?}, moments {:?}",
                    p.shape(),
                    self.first[i].shape()
                )));
            }
            if let Some(g) = g {
                if !g.same_shape(p) {
                    return Err(Error::Shape(format!(
                        "adam: gradient {i} shape {:?} vs parameter {:?}",
                        g.shape(),
                        p.shape()
                    )));
                }
                if let Some(pos) = g.values().iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "gradient of parameter {i} entry {pos} is {}",
                        g.values()[pos]
                    )));
                }
            }
        }

        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let m = self.first[i].values_mut();
            let v = self.second[i].values_mut();
            match grads[i] {
                Some(g) => {
                    for (((pj, mj), vj), &gj) in p.values_mut().iter_mut().zip(m).zip(v).zip(g.values()) {
                        *mj = beta1 * *mj + (1.0 - beta1) * gj;
                        *vj = beta2 * *vj + (1.0 - beta2) * gj * gj;
                        let mhat = *mj / bc1;
                        let vhat = *vj / bc2;
                        *pj -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
                None => {
                    for ((pj, mj), vj) in p.values_mut().iter_mut().zip(m).zip(v) {
                        *mj *= beta1;
                        *vj *= beta2;
                        if *mj != 0.0 {
                            *pj -= lr * (*mj / bc1) / ((*vj / bc2).sqrt() + eps);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrKind {
    Constant,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub total_epochs: usize,
    pub kind: LrKind,
}

impl LrSchedule {
    pub fn cosine(base_lr: f64, total_epochs: usize) -> Self {
        Self {
            base_lr,
            total_epochs,
            kind: LrKind::Cosine,
        }
    }

    pub fn constant(base_lr: f64, total_epochs: usize) -> Self {
        Self {
            base_lr,
            total_epochs,
            kind: LrKind::Constant,
        }
    }

    /// Learning rate at `epoch ∈ [0, total_epochs]`.
    pub fn lr_at(&self, epoch: usize) -> Result<f64> {
        if self.total_epochs == 0 || epoch > self.total_epochs {
            return Err(Error::Contract(format!(
                "epoch {epoch} outside schedule of {} epochs",
                self.total_epochs
            )));
        }
        Ok(match self.kind {
            LrKind::Constant => self.base_lr,
            LrKind::Cosine => {
                let phase = std::f64::consts::PI * epoch as f64 / self.total_epochs as f64;
                // cos(π) is not exactly -1 in floating point
                if epoch == self.total_epochs {
                    0.0
                } else {
                    self.base_lr * 0.5 * (1.0 + phase.cos())
                }
            }
        })
    }
}
