use super::{softmax, Matrix};
use crate::error::{Error, Result};

/// Mean softmax cross-entropy over rows and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::validation(format!(
            "{} logit rows but {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    if logits.rows() == 0 {
        return Err(Error::validation("cross-entropy over an empty batch"));
    }
    let classes = logits.cols();
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::validation(format!(
            "label {label} at row {row} out of range for {classes} classes"
        )));
    }
    let n = logits.rows() as f64;
    let mut grad = softmax(logits);
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += log_sum - (row[label] - max);
        let g = grad.row_mut(r);
        g[label] -= 1.0;
        g.iter_mut().for_each(|v| *v /= n);
    }
    Ok((loss / n, grad))
}
