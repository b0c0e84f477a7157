//! Sensor-specific (feature) attention and central time attention.

use crate::error::{Error, Result};
use crate::nn::{Bound, Dense};
use crate::tensor::{Graph, Var};

/// Feature attention inside one task.
///
/// For `x: [batch, T, D]` a shared `D → D` scoring layer is applied to every
/// time-step row, a softmax across the `D` features gives the attention
/// matrix `A: [batch, T, D]`, and the context is `tanh(x ⊙ A)`.
/// Returns `(context, attention)`.
pub fn sensor_attention(g: &mut Graph, score: &Dense, params: &Bound, x: Var) -> Result<(Var, Var)> {
    let dims = g.dims(x).to_vec();
    if dims.len() != 3 || score.input_size != dims[2] || score.output_size != dims[2] {
        return Err(Error::dim("sensor_attention", &dims, &[score.input_size, score.output_size]));
    }
    let (batch, steps, features) = (dims[0], dims[1], dims[2]);
    let rows = g.reshape(x, vec![batch * steps, features])?;
    let scores = score.forward(g, params, rows)?;
    let weights = g.softmax(scores, 1)?;
    let attention = g.reshape(weights, vec![batch, steps, features])?;
    let weighted = g.mul(x, attention)?;
    Ok((g.tanh(weighted), attention))
}

/// Time-attention weights from the hidden sequences of all tasks.
///
/// The `K` hidden tensors `[batch, T, H]` are concatenated on the hidden
/// axis, each batch row is flattened to `T·K·H`, projected by a dense layer
/// with `T` units and `tanh`, and normalised by a softmax over time.
/// Returns `a: [batch, T]`.
pub fn time_attention(g: &mut Graph, score: &Dense, params: &Bound, hiddens: &[Var]) -> Result<Var> {
    let first = *hiddens
        .first()
        .ok_or_else(|| Error::Contract("central attention needs at least one task".into()))?;
    let base = g.dims(first).to_vec();
    if base.len() != 3 {
        return Err(Error::dim("central_attention", &base, &[0, 0, 0]));
    }
    for &h in hiddens {
        let d = g.dims(h);
        if d.len() != 3 || d[0] != base[0] || d[1] != base[1] {
            return Err(Error::dim("central_attention", &base, d));
        }
    }
    let (batch, steps) = (base[0], base[1]);
    let shared = g.concat(hiddens, 2)?;
    let width = g.value(shared).len() / batch;
    if score.input_size != width || score.output_size != steps {
        return Err(Error::dim(
            "central_attention scorer",
            &[score.input_size, score.output_size],
            &[width, steps],
        ));
    }
    let flat = g.reshape(shared, vec![batch, width])?;
    // Scorer activation is tanh, giving the bounded context scores.
    let context = score.forward(g, params, flat)?;
    g.softmax(context, 1)
}

/// Scales every time step of the raw inputs `x: [batch, T, D]` by its
/// attention weight from `a: [batch, T]`.
pub fn apply_time_attention(g: &mut Graph, x: Var, attention: Var) -> Result<Var> {
    let (xd, ad) = (g.dims(x).to_vec(), g.dims(attention).to_vec());
    if xd.len() != 3 || ad.len() != 2 || xd[0] != ad[0] || xd[1] != ad[1] {
        return Err(Error::dim("apply_time_attention", &xd, &ad));
    }
    let expanded = g.repeat(attention, 2, xd[2])?;
    g.mul(x, expanded)
}

/// Central attention end to end: returns the attended inputs of every task
/// and the shared weights.
pub fn central_attention(
    g: &mut Graph,
    score: &Dense,
    params: &Bound,
    hiddens: &[Var],
    inputs: &[Var],
) -> Result<(Vec<Var>, Var)> {
    if hiddens.len() != inputs.len() {
        return Err(Error::Contract(format!(
            "{} hidden sequences for {} input tensors",
            hiddens.len(),
            inputs.len()
        )));
    }
    let a = time_attention(g, score, params, hiddens)?;
    let contexts = inputs
        .iter()
        .map(|&x| apply_time_attention(g, x, a))
        .collect::<Result<_>>()?;
    Ok((contexts, a))
}
