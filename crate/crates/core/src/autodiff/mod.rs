//! Reverse-mode differentiation sized for small dense networks.

mod gradcheck;
mod graph;
mod optim;
mod tensor;

pub use gradcheck::{grad_check, rel_error, GradCheckReport, FD_STEP};
pub use graph::{affine_forward, gelu, sigmoid, Gradients, Graph, ParamKey, Var};
pub use optim::{AdamConfig, AdamState, LrKind, LrSchedule};
pub use tensor::Tensor;
