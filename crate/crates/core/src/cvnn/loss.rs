use super::Tensor;
use crate::error::{invalid, Result};

pub const BCE_CLIP: f64 = 1e-7;

/// Binary cross-entropy, averaged over the `N_t` outputs and the batch.
/// Probabilities are clipped to `[1e-7, 1 - 1e-7]`; the gradient is zero where
/// the clip is active.
pub fn bce(p: &Tensor, labels: &[f64]) -> Result<(f64, Tensor)> {
    if p.shape().len() != 2 || p.data().len() != labels.len() {
        return Err(invalid(format!(
            "bce needs [batch, n] probabilities matching {} labels, got {:?}",
            labels.len(),
            p.shape()
        )));
    }
    let n = p.shape()[1] as f64;
    let scale = 1.0 / (n * p.batch() as f64);
    let mut grad = Tensor::zeros(p.shape());
    let mut loss = 0.0;
    for ((g, &pv), &y) in grad.data_mut().iter_mut().zip(p.data()).zip(labels) {
        let q = pv.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
        loss -= y * q.ln() + (1.0 - y) * (1.0 - q).ln();
        if q == pv {
            *g = -scale * (y / q - (1.0 - y) / (1.0 - q));
        }
    }
    Ok((loss * scale, grad))
}

/// Mean over the batch of the squared error per sample. For complex
/// tensors the real and imaginary slots together give `|s_hat - s|^2`.
pub fn mse(out: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if out.shape() != target.shape() {
        return Err(invalid(format!("mse shapes differ: {:?} vs {:?}", out.shape(), target.shape())));
    }
    let scale = 1.0 / out.batch() as f64;
    let mut grad = Tensor::zeros(out.shape());
    let mut loss = 0.0;
    for ((g, a), b) in grad.data_mut().iter_mut().zip(out.data()).zip(target.data()) {
        let d = a - b;
        loss += d * d;
        *g = 2.0 * d * scale;
    }
    Ok((loss * scale, grad))
}
