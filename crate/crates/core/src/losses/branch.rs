use crate::error::{Error, Result};
use crate::neuralcore::{softmax_cross_entropy, Matrix};

/// Sum over branches of the per-branch mean cross-entropy, with one logit
/// gradient per branch.
pub fn classification_loss(
    branch_logits: &[Matrix],
    branch_labels: &[&[usize]],
) -> Result<(f64, Vec<Matrix>)> {
    if branch_logits.len() != branch_labels.len() {
        return Err(Error::validation(format!(
            "{} logit blocks but {} label vectors",
            branch_logits.len(),
            branch_labels.len()
        )));
    }
    if branch_logits.is_empty() {
        return Err(Error::validation(
            "classification loss needs at least one branch",
        ));
    }
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(branch_logits.len());
    for (i, (logits, labels)) in branch_logits.iter().zip(branch_labels).enumerate() {
        let (loss, g) = softmax_cross_entropy(logits, labels)
            .map_err(|e| Error::validation(format!("branch {i}: {e}")))?;
        total += loss;
        grads.push(g);
    }
    Ok((total, grads))
}

/// Mean over unordered branch pairs of the elementwise mean `|P_i − P_j|`.
///
/// Inputs are per-branch target probabilities (batch × classes). The
/// subgradient of `|x|` at 0 is taken as 0.
pub fn discrepancy_loss(branch_probs: &[Matrix]) -> Result<(f64, Vec<Matrix>)> {
    let Some(first) = branch_probs.first() else {
        return Err(Error::validation(
            "discrepancy loss needs at least one branch",
        ));
    };
    let shape = first.shape();
    if let Some(bad) = branch_probs.iter().find(|p| p.shape() != shape) {
        return Err(Error::Shape {
            op: "discrepancy_loss",
            left: shape,
            right: bad.shape(),
        });
    }
    let n = branch_probs.len();
    let mut grads: Vec<Matrix> = (0..n).map(|_| Matrix::zeros(shape.0, shape.1)).collect();
    if n < 2 || first.is_empty() {
        return Ok((0.0, grads));
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let scale = 1.0 / (pairs * first.len() as f64);
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut pair_sum = 0.0;
            for (k, (&a, &b)) in branch_probs[i]
                .data()
                .iter()
                .zip(branch_probs[j].data())
                .enumerate()
            {
                let diff = a - b;
                pair_sum += diff.abs();
                let s = if diff > 0.0 {
                    scale
                } else if diff < 0.0 {
                    -scale
                } else {
                    0.0
                };
                grads[i].data_mut()[k] += s;
                grads[j].data_mut()[k] -= s;
            }
            total += pair_sum;
        }
    }
    Ok((total * scale, grads))
}
