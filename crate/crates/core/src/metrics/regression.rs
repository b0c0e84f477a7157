use crate::error::{Error, Result};

/// Symmetric mean absolute percentage error, `mean(2|ŷ - y| / (|ŷ| + |y|))`,
/// with a term of zero when both values are zero. Range `[0, 2]`.
pub fn smape(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::dim("smape", &[pred.len()], &[truth.len()]));
    }
    let total: f64 = pred
        .iter()
        .zip(truth)
        .map(|(&p, &y)| {
            let den = p.abs() + y.abs();
            if den == 0.0 {
                0.0
            } else {
                2.0 * (p - y).abs() / den
            }
        })
        .sum();
    Ok(total / pred.len() as f64)
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::dim("mae", &[pred.len()], &[truth.len()]));
    }
    Ok(pred.iter().zip(truth).map(|(p, y)| (p - y).abs()).sum::<f64>() / pred.len() as f64)
}
