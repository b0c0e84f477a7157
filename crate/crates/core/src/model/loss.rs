use crate::error::{Error, Result};
use crate::tensor::{Graph, Var};

use super::TaskKind;

const CLAMP: f64 = 1e-12;

fn check_shapes(g: &Graph, pred: Var, target: Var) -> Result<()> {
    let (p, t) = (g.dims(pred), g.dims(target));
    if p != t || p.len() != 2 {
        return Err(Error::dim("loss", p, t));
    }
    Ok(())
}

/// Binary cross-entropy summed over labels, averaged over the batch.
/// Predictions are clamped to `[1e-12, 1 - 1e-12]`.
pub fn loss_classification(g: &mut Graph, pred: Var, target: Var) -> Result<Var> {
    check_shapes(g, pred, target)?;
    if let Some(bad) = g.value(target).data().iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Data(format!("classification label {bad} is not 0 or 1")));
    }
    let batch = g.dims(pred)[0] as f64;
    let p = g.clamp(pred, CLAMP, 1.0 - CLAMP);
    let log_p = g.ln(p);
    let neg = g.scale(p, -1.0);
    let one_minus_p = g.add_scalar(neg, 1.0);
    let log_q = g.ln(one_minus_p);
    let neg_y = g.scale(target, -1.0);
    let one_minus_y = g.add_scalar(neg_y, 1.0);
    let pos = g.mul(target, log_p)?;
    let negs = g.mul(one_minus_y, log_q)?;
    let both = g.add(pos, negs)?;
    let total = g.sum(both);
    Ok(g.scale(total, -1.0 / batch))
}

/// `(1/M) Σ_m Σ_i |ŷ - y|`, averaged over the batch.
pub fn loss_regression(g: &mut Graph, pred: Var, target: Var) -> Result<Var> {
    check_shapes(g, pred, target)?;
    let (batch, labels) = (g.dims(pred)[0] as f64, g.dims(pred)[1] as f64);
    let diff = g.sub(pred, target)?;
    let abs = g.abs(diff);
    let total = g.sum(abs);
    Ok(g.scale(total, 1.0 / (batch * labels)))
}

pub fn task_loss(g: &mut Graph, kind: TaskKind, pred: Var, target: Var) -> Result<Var> {
    match kind {
        TaskKind::Classification => loss_classification(g, pred, target),
        TaskKind::Regression => loss_regression(g, pred, target),
    }
}
