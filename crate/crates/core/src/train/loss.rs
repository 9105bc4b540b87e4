//! Cross-entropy over predicted class distributions.

use candle_core::{DType, Tensor, D};

use crate::error::{Error, Result};

/// Probabilities are clamped to this floor before the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean over the batch of `-log p(true class)`, as a differentiable scalar.
pub fn cross_entropy_loss(probs: &Tensor, labels: &Tensor) -> Result<Tensor> {
    if probs.dims() != labels.dims() || probs.rank() != 2 {
        return Err(Error::Shape(format!(
            "probabilities {:?} and labels {:?} must be matching B×K",
            probs.dims(),
            labels.dims()
        )));
    }
    for (i, row) in labels.to_dtype(DType::F64)?.to_vec2::<f64>()?.iter().enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::Input(format!("label row {i} is not one-hot")));
        }
    }
    let p_true = (probs * labels.to_dtype(probs.dtype())?)?.sum(D::Minus1)?;
    Ok(p_true.clamp(PROB_FLOOR, 1.0)?.log()?.neg()?.mean_all()?)
}

/// Plain-float form for metric code and oracles.
pub fn cross_entropy(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::Input("cross entropy needs one label per non-empty batch row".into()));
    }
    let mut total = 0.0;
    for (row, &l) in probs.iter().zip(labels) {
        let p = *row
            .get(l)
            .ok_or_else(|| Error::Input(format!("label {l} outside {} classes", row.len())))?;
        total -= p.max(PROB_FLOOR).ln();
    }
    Ok(total / probs.len() as f64)
}
