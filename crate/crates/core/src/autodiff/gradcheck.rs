use super::graph::{Graph, ParamKey, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Outcome of comparing tape gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub worst_rel_error: f64,
    /// `(parameter index, entry)` of the worst mismatch.
    pub worst_at: Option<(usize, usize)>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.worst_rel_error < self.tolerance
    }
}

/// Relative error with a small absolute floor so that exactly-zero partials
/// compare on an absolute scale.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

pub const FD_STEP: f64 = 1e-5;

/// Checks every partial of a scalar loss built by `forward` against a central
/// finite difference with step `FD_STEP`.
///
/// `forward` receives a fresh graph and one bound variable per parameter
/// tensor, and must return a scalar loss. It is invoked `2·#entries + 1` times
/// and must be deterministic.
pub fn grad_check<F>(forward: F, params: &[Tensor], tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params
        .iter()
        .enumerate()
        .map(|(i, p)| g.param(p.clone(), ParamKey { set: 0, index: i }))
        .collect();
    let loss = forward(&mut g, &vars);
    let grads = g.backward(loss)?;

    let eval = |ps: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = ps.iter().map(|p| g.constant(p.clone())).collect();
        let l = forward(&mut g, &vars);
        g.value(l).values()[0]
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut report = GradCheckReport {
        checked: 0,
        worst_rel_error: 0.0,
        worst_at: None,
        tolerance,
    };
    for (pi, p) in params.iter().enumerate() {
        let analytic = grads.get(&ParamKey { set: 0, index: pi });
        for e in 0..p.len() {
            let orig = p.values()[e];
            work[pi].values_mut()[e] = orig + FD_STEP;
            let up = eval(&work);
            work[pi].values_mut()[e] = orig - FD_STEP;
            let down = eval(&work);
            work[pi].values_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic.map(|t| t.values()[e]).unwrap_or(0.0);
            let err = rel_error(a, numeric);
            report.checked += 1;
            if err > report.worst_rel_error || report.worst_at.is_none() {
                report.worst_rel_error = err;
                report.worst_at = Some((pi, e));
            }
        }
    }
    Ok(report)
}
