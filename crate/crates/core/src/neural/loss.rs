use super::NeuralError;

/// Softmax cross-entropy for a single target.
///
/// Returns `(-log p[target], p)`. The maximum logit is subtracted before
/// exponentiating so large logits do not overflow.
pub fn softmax_cross_entropy(
    logits: &[f64],
    target: usize,
) -> Result<(f64, Vec<f64>), NeuralError> {
    if target >= logits.len() {
        return Err(NeuralError::IndexOutOfRange {
            index: target,
            len: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let probs = exps.iter().map(|e| e / total).collect();
    let loss = total.ln() - (logits[target] - max);
    Ok((loss, probs))
}
