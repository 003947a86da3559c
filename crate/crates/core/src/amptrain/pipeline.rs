use super::metrics::MetricRow;
use super::trainer::Trainer;
use super::variant::{Phase, PipelineVariant, StepKind};
use crate::error::Result;
use crate::semcodec::{Checkpoint, ModelConfig, Networks};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub variant: PipelineVariant,
    pub checkpoint: Checkpoint,
    pub metrics: Vec<MetricRow>,
    /// State just before a closing alignment step, if the plan has one.
    pub before_align: Option<Networks>,
}

struct Snapshot {
    done: Vec<Phase>,
    nets: Networks,
    metrics: Vec<MetricRow>,
}

/// Trains one variant from a fresh initialisation.
pub fn run_amp(variant: PipelineVariant, trainer: &Trainer<'_>, model: &ModelConfig) -> Result<RunOutput> {
    Ok(run_variants(&[variant], trainer, model)?.remove(0))
}

/// Trains several variants, reusing the state of any plan prefix already
/// trained. Every phase draws from streams keyed by seed, step and round,
/// so a shared prefix produces the same state it would in a separate run.
pub fn run_variants(variants: &[PipelineVariant], trainer: &Trainer<'_>, model: &ModelConfig) -> Result<Vec<RunOutput>> {
    let mut cache = vec![Snapshot {
        done: Vec::new(),
        nets: Networks::new(model, trainer.seed, false)?,
        metrics: Vec::new(),
    }];
    let mut out = Vec::with_capacity(variants.len());
    for &variant in variants {
        let plan = variant.plan(trainer.schedule)?;
        let start = cache
            .iter()
            .filter(|s| plan.starts_with(&s.done))
            .max_by_key(|s| s.done.len())
            .expect("empty prefix always matches");
        let skip = start.done.len();
        let mut nets = start.nets.clone();
        let mut metrics = start.metrics.clone();
        let mut before_align = None;
        for (i, phase) in plan.iter().enumerate() {
            let is_last_align = i + 1 == plan.len() && phase.kind == StepKind::Align;
            if i < skip {
                continue;
            }
            if is_last_align {
                before_align = Some(nets.clone());
            }
            trainer.run_phase(&mut nets, phase, &mut metrics)?;
            cache.push(Snapshot {
                done: plan[..=i].to_vec(),
                nets: nets.clone(),
                metrics: metrics.clone(),
            });
        }
        if before_align.is_none() && plan.last().map(|p| p.kind) == Some(StepKind::Align) {
            // the whole plan was cached; recover the pre-alignment snapshot
            let prefix = &plan[..plan.len() - 1];
            before_align = cache.iter().find(|s| s.done == prefix).map(|s| s.nets.clone());
        }
        if variant.has_restorer() {
            nets.attach_restorer(trainer.seed);
        }
        out.push(RunOutput {
            variant,
            checkpoint: Checkpoint::new(nets, trainer.seed, variant.name()),
            metrics,
            before_align,
        });
    }
    Ok(out)
}
