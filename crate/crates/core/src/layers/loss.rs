use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over a batch of logits `[batch, classes]`.
///
/// Returns the mean loss and its gradient with respect to the logits,
/// `(softmax - one_hot) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let &[batch, classes] = logits.shape() else {
        return Err(Error::InvalidShape(logits.shape().to_vec()));
    };
    if labels.len() != batch {
        return Err(Error::ShapeMismatch {
            op: "softmax_cross_entropy",
            left: logits.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    let mut grad = Vec::with_capacity(batch * classes);
    let mut loss = 0.0;
    for (row, &label) in logits.data().chunks_exact(classes).zip(labels) {
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let log_sum = sum.ln();
        loss += log_sum - (row[label] - max);
        for (c, &z) in row.iter().enumerate() {
            let p = (z - max).exp() / sum;
            let target = if c == label { 1.0 } else { 0.0 };
            grad.push((p - target) / batch as f64);
        }
    }
    Ok((loss / batch as f64, Tensor::new(&[batch, classes], grad)?))
}
