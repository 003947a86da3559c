//! Epoch loops of the five steps.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::link::{receive, reconstruct, sample_mask, send_digital, EvalPath, ReceiverGrad};
use super::metrics::MetricRow;
use super::schedule::TrainingSchedule;
use super::variant::{Phase, StepKind};
use crate::autodiff::{AdamConfig, AdamState, Gradients, Graph, LrSchedule, Tensor, Var};
use crate::dataset::Dataset;
use crate::digichain::Channel;
use crate::error::{Error, Result};
use crate::evalkit::psnr_tensor;
use crate::rng::{self, tag};
use crate::semcodec::{Networks, ParamSet, DECODER_SET, ENCODER_SET, RESTORER_SET};

/// Validation runs after every this many epochs.
pub const VAL_EVERY: usize = 5;

/// Everything a training run needs besides the networks.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    pub train: &'a Dataset,
    pub val: &'a Dataset,
    pub schedule: &'a TrainingSchedule,
    /// Channel of the digital steps.
    pub channel: Channel,
    pub seed: u64,
}

struct BatchRngs {
    noise: rng::Rng,
    mask: rng::Rng,
    channel: rng::Rng,
}

/// Trainable-set flags of a step.
#[derive(Debug, Clone, Copy)]
struct Trainable {
    encoder: bool,
    decoder: bool,
    restorer: bool,
}

fn trainable(phase: &Phase) -> Trainable {
    Trainable {
        encoder: !phase.kind.encoder_frozen(),
        decoder: true,
        restorer: phase.restorer && matches!(phase.kind, StepKind::DecoderOnly | StepKind::Joint | StepKind::Align),
    }
}

fn gaussian(shape: &[usize], alpha: f64, rng: &mut rng::Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let v = (0..n).map(|_| alpha * rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(shape.to_vec(), v).expect("noise shape")
}

impl<'a> Trainer<'a> {
    pub fn new(train: &'a Dataset, val: &'a Dataset, schedule: &'a TrainingSchedule, seed: u64) -> Result<Self> {
        schedule.validate()?;
        Ok(Self {
            train,
            val,
            schedule,
            channel: Channel::bsc(schedule.p)?,
            seed,
        })
    }

    fn stage_tags(phase: &Phase, kind_tag: u64, epoch: usize) -> [u64; 4] {
        [kind_tag, phase.kind.number() as u64, phase.round as u64, epoch as u64]
    }

    /// Loss graph of one mini-batch.
    fn batch_loss(&self, nets: &Networks, phase: &Phase, x: &Tensor, rngs: &mut BatchRngs) -> Result<(Graph, Var)> {
        let t = trainable(phase);
        let mut g = Graph::new();
        let rows = x.rows();
        let n = nets.config.feature_dim;
        let xi = g.constant(x.clone());
        let grad = ReceiverGrad {
            restorer: t.restorer,
            decoder: t.decoder,
        };
        let loss = match phase.kind {
            StepKind::Extract => {
                let f = nets.encoder.forward(&mut g, xi, true)?;
                let y = nets.decoder.forward(&mut g, f, true)?;
                g.l1_loss(y, x)
            }
            StepKind::SoftQuant => {
                let f = nets.encoder.forward(&mut g, xi, true)?;
                let noise = g.constant(gaussian(&[rows, n], self.schedule.alpha, &mut rngs.noise));
                let fq = g.add(f, noise);
                let y = nets.decoder.forward(&mut g, fq, true)?;
                g.l1_loss(y, x)
            }
            StepKind::Joint => {
                let f = nets.encoder.forward(&mut g, xi, true)?;
                let noise = g.constant(gaussian(&[rows, n], self.schedule.alpha, &mut rngs.noise));
                let fq = g.add(f, noise);
                let mask = Tensor::matrix(rows, n, sample_mask(rows * n, phase.mask_ratio, &mut rngs.mask)?)?;
                let fm = g.mul_const(fq, &mask);
                let (_, y) = receive(&mut g, nets, fm, phase.restorer, grad)?;
                g.l1_loss(y, x)
            }
            StepKind::DecoderOnly | StepKind::Align => {
                // the encoder runs outside the tape: nothing upstream of the
                // received features can take a gradient
                let features = nets.encoder.encode(x)?;
                let rx = send_digital(&features, nets.config.bits, &self.channel, &mut rngs.channel)?;
                let z = if phase.mask_ratio > 0.0 {
                    let mask = sample_mask(rows * n, phase.mask_ratio, &mut rngs.mask)?;
                    let v = rx.demodulated.values().iter().zip(&mask).map(|(a, m)| a * m).collect();
                    Tensor::matrix(rows, n, v)?
                } else {
                    rx.demodulated
                };
                let zi = g.constant(z);
                let (restored, y) = receive(&mut g, nets, zi, phase.restorer, grad)?;
                let recon = g.l1_loss(y, x);
                match restored {
                    Some(zt) => {
                        let feat = g.l1_loss(zt, &rx.quantized);
                        g.add(recon, feat)
                    }
                    None => recon,
                }
            }
        };
        Ok((g, loss))
    }

    /// Digital-path PSNR on the validation set at the training channel.
    pub fn validate(&self, nets: &Networks, tags: &[u64]) -> Result<f64> {
        let mut r = rng::stream(self.seed, tags);
        let x = self.val.all();
        let y = reconstruct(nets, &x, &EvalPath::Digital(self.channel.clone()), &mut r)?;
        psnr_tensor(&y, &x)
    }

    /// Runs one phase in place, appending one metric row per epoch.
    pub fn run_phase(&self, nets: &mut Networks, phase: &Phase, log: &mut Vec<MetricRow>) -> Result<()> {
        if phase.restorer {
            nets.attach_restorer(self.seed);
        }
        let t = trainable(phase);
        let adam = AdamConfig::default();
        let mut enc_opt = t.encoder.then(|| AdamState::new(&nets.encoder.params.tensors, adam));
        let mut dec_opt = AdamState::new(&nets.decoder.params.tensors, adam);
        let mut res_opt = match (&nets.restorer, t.restorer) {
            (Some(r), true) => Some(AdamState::new(&r.params.tensors, adam)),
            _ => None,
        };
        let frozen_digest = phase.kind.encoder_frozen().then(|| nets.encoder.params.digest());
        let lr_sched = LrSchedule::cosine(phase.budget.lr, phase.budget.epochs);
        let bs = self.schedule.batch_size;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        for epoch in 0..phase.budget.epochs {
            let lr = lr_sched.lr_at(epoch)?;
            let mut shuffle = rng::stream(self.seed, &Self::stage_tags(phase, tag::SHUFFLE, epoch));
            order.shuffle(&mut shuffle);
            let mut rngs = BatchRngs {
                noise: rng::stream(self.seed, &Self::stage_tags(phase, tag::SOFT_NOISE, epoch)),
                mask: rng::stream(self.seed, &Self::stage_tags(phase, tag::MASK, epoch)),
                channel: rng::stream(self.seed, &Self::stage_tags(phase, tag::CHANNEL, epoch)),
            };
            let mut total = 0.0;
            for (b, chunk) in order.chunks(bs).enumerate() {
                let x = self.train.batch(chunk);
                let (g, loss) = self.batch_loss(nets, phase, &x, &mut rngs)?;
                let lv = g.value(loss).values()[0];
                if !lv.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "{} round {} epoch {epoch} batch {b}: loss {lv}",
                        phase.kind.name(),
                        phase.round
                    )));
                }
                let grads = g.backward(loss)?;
                if !t.encoder && grads.keys().any(|k| k.set == ENCODER_SET) {
                    return Err(Error::Invariant(format!(
                        "{}: gradient reached the frozen encoder",
                        phase.kind.name()
                    )));
                }
                if let Some(opt) = enc_opt.as_mut() {
                    apply(opt, &mut nets.encoder.params, &grads, ENCODER_SET, lr)?;
                }
                apply(&mut dec_opt, &mut nets.decoder.params, &grads, DECODER_SET, lr)?;
                if let (Some(opt), Some(r)) = (res_opt.as_mut(), nets.restorer.as_mut()) {
                    apply(opt, &mut r.params, &grads, RESTORER_SET, lr)?;
                }
                total += lv * chunk.len() as f64;
            }
            let val_psnr = if (epoch + 1) % VAL_EVERY == 0 {
                Some(self.validate(nets, &Self::stage_tags(phase, tag::EVAL, epoch))?)
            } else {
                None
            };
            log.push(MetricRow {
                phase: phase.kind.name().to_string(),
                step: phase.kind.number(),
                round: phase.round,
                epoch: epoch + 1,
                lr,
                train_loss: total / self.train.len().max(1) as f64,
                val_psnr,
            });
        }
        if let Some(before) = frozen_digest {
            if before != nets.encoder.params.digest() {
                return Err(Error::Invariant(format!("{}: frozen encoder changed", phase.kind.name())));
            }
        }
        Ok(())
    }

    /// Mean training loss of `phase`'s objective without updating anything.
    pub fn objective(&self, nets: &Networks, phase: &Phase, batch: &[usize], epoch: usize) -> Result<f64> {
        let mut rngs = BatchRngs {
            noise: rng::stream(self.seed, &Self::stage_tags(phase, tag::SOFT_NOISE, epoch)),
            mask: rng::stream(self.seed, &Self::stage_tags(phase, tag::MASK, epoch)),
            channel: rng::stream(self.seed, &Self::stage_tags(phase, tag::CHANNEL, epoch)),
        };
        let (g, loss) = self.batch_loss(nets, phase, &self.train.batch(batch), &mut rngs)?;
        Ok(g.value(loss).values()[0])
    }
}

fn apply(opt: &mut AdamState, set: &mut ParamSet, grads: &Gradients, id: u32, lr: f64) -> Result<()> {
    let by_index: BTreeMap<usize, &Tensor> = grads
        .iter()
        .filter(|(k, _)| k.set == id)
        .map(|(k, v)| (k.index, v))
        .collect();
    let g: Vec<Option<&Tensor>> = (0..set.len()).map(|i| by_index.get(&i).copied()).collect();
    opt.update(&mut set.tensors, &g, lr)
}
