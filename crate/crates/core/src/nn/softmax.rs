use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &Tensor) -> Tensor {
    let max = logits.data().iter().cloned().fold(Real::NEG_INFINITY, Real::max);
    let exps = logits.map(|v| (v - max).exp());
    let total = exps.sum();
    exps.map(|v| v / total)
}

/// Backward of a standalone softmax given its output `probs`.
pub fn softmax_backward(upstream: &Tensor, probs: &Tensor) -> Result<Tensor> {
    if upstream.shape() != probs.shape() {
        return Err(Error::ShapeMismatch {
            op: "softmax_backward",
            left: upstream.shape().to_vec(),
            right: probs.shape().to_vec(),
        });
    }
    let dot: Real = upstream
        .data()
        .iter()
        .zip(probs.data())
        .map(|(g, p)| g * p)
        .sum();
    Tensor::new(
        probs.shape().to_vec(),
        upstream
            .data()
            .iter()
            .zip(probs.data())
            .map(|(g, p)| p * (g - dot))
            .collect(),
    )
}

#[derive(Debug, Clone)]
pub struct SoftmaxXent {
    pub probabilities: Tensor,
    pub loss: Real,
    /// `probabilities - one_hot(label)`
    pub logit_grad: Tensor,
}

/// Softmax followed by cross-entropy against `label`.
pub fn softmax_xent(logits: &Tensor, label: usize) -> Result<SoftmaxXent> {
    let classes = logits.len();
    if logits.rank() != 1 || classes < 2 {
        return Err(Error::invalid(format!(
            "softmax needs a vector of at least 2 logits, got shape {:?}",
            logits.shape()
        )));
    }
    if label >= classes {
        return Err(Error::invalid(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    let max = logits.data().iter().cloned().fold(Real::NEG_INFINITY, Real::max);
    let log_total = logits.data().iter().map(|v| (v - max).exp()).sum::<Real>().ln();
    let probabilities = softmax(logits);
    let loss = -(logits.data()[label] - max - log_total);
    let mut logit_grad = probabilities.clone();
    logit_grad.data_mut()[label] -= 1.0;
    Ok(SoftmaxXent {
        probabilities,
        loss,
        logit_grad,
    })
}
