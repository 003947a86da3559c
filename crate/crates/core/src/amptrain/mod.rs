//! Multi-phase training: analog pre-training, soft quantization,
//! alternating digital/analog rounds and the final alignment step.

mod link;
mod metrics;
mod pipeline;
mod schedule;
mod trainer;
mod variant;

pub use link::{receive, reconstruct, sample_mask, send_digital, EvalPath, ReceiverGrad, Received};
pub use metrics::{write_metrics_csv, MetricRow, METRICS_HEADER};
pub use pipeline::{run_amp, run_variants, RunOutput};
pub use schedule::{StepBudget, TrainingSchedule, DEFAULT_ALPHA, DEFAULT_P, DEFAULT_ROUNDS};
pub use trainer::{Trainer, VAL_EVERY};
pub use variant::{Phase, PipelineVariant, StepKind};
