use super::tensor::Tensor;
use super::NnError;

/// Numerically stable softmax of one logit row.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub struct LossOutput {
    /// Weighted mean loss, `Σ w_y·ce / Σ w_y`.
    pub loss: f64,
    /// `Σ w_y` over the batch.
    pub weight_sum: f64,
    /// `dloss/dlogits`, `[N, C]`.
    pub grad: Tensor,
}

/// Class-weighted cross-entropy. Per sample `w_y · (logsumexp(z) - z_y)`,
/// normalized by the sum of the sample weights.
pub fn weighted_cross_entropy(logits: &Tensor, labels: &[usize], weights: &[f64]) -> Result<LossOutput, NnError> {
    let n = labels.len();
    let c = weights.len();
    logits.expect_shape(&[n, c])?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(NnError::ShapeMismatch { expected: vec![c], got: vec![bad] });
    }
    let weight_sum: f64 = labels.iter().map(|&l| weights[l]).sum();
    let mut grad = Tensor::zeros(&[n, c]);
    if weight_sum <= 0.0 {
        return Ok(LossOutput { loss: 0.0, weight_sum: 0.0, grad });
    }
    let mut total = 0.0;
    for ((row, g), &label) in logits.data().chunks(c).zip(grad.data_mut().chunks_mut(c)).zip(labels) {
        let w = weights[label];
        if w == 0.0 {
            continue;
        }
        total += w * (log_sum_exp(row) - row[label]);
        let scale = w / weight_sum;
        for (gi, p) in g.iter_mut().zip(softmax(row)) {
            *gi = scale * p;
        }
        g[label] -= scale;
    }
    Ok(LossOutput { loss: total / weight_sum, weight_sum, grad })
}
