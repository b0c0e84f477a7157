//! Central finite-difference gradient checking.
//!
//! The checker only evaluates the forward pass at perturbed inputs, so it is
//! independent of every backward rule it verifies.

use super::{Graph, Tensor, Var};
use crate::error::Result;

/// Largest discrepancy found by [`check`].
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// `max |analytic - numeric| / max(1, |numeric|)` over all checked entries.
    pub max_rel_error: f64,
    /// `(input, flat index)` of the worst entry.
    pub worst: (usize, usize),
    pub entries: usize,
}

/// Compares the tape gradient of the scalar `f(inputs)` with central
/// differences of step `eps` for every element of every input.
pub fn check<F>(inputs: &[Tensor], eps: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    g.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| g.grad_or_zeros(v)).collect();

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).item())
    };

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: (0, 0),
        entries: 0,
    };
    let mut work = inputs.to_vec();
    for (which, input) in inputs.iter().enumerate() {
        for idx in 0..input.len() {
            let original = input.data()[idx];
            work[which].data_mut()[idx] = original + eps;
            let up = eval(&work)?;
            work[which].data_mut()[idx] = original - eps;
            let down = eval(&work)?;
            work[which].data_mut()[idx] = original;
            let numeric = (up - down) / (2.0 * eps);
            let err = (analytic[which].data()[idx] - numeric).abs() / numeric.abs().max(1.0);
            report.entries += 1;
            if err > report.max_rel_error || !err.is_finite() {
                report.max_rel_error = if err.is_finite() { err } else { f64::INFINITY };
                report.worst = (which, idx);
            }
        }
    }
    Ok(report)
}
