//! Minimal neural-network kernel: dense layers, a GRU cell, hand-derived
//! reverse-mode gradients, and Adam. Everything is `f64`; forward passes
//! return explicit caches that the matching backward passes consume.

mod adam;
mod dense;
mod flatten;
mod gru;
mod init;
mod linalg;

pub use adam::AdamState;
pub use dense::{Activation, DenseCache, DenseLayer, Mlp, MlpCache, MlpGrad};
pub use flatten::Flatten;
pub use gru::{GruCache, GruCell, GruGrad};
pub use init::{fan_in_uniform, orthogonal};
pub use linalg::Mat;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// log softmax(logits), stable.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits
        .iter()
        .map(|&v| (v - max).exp())
        .sum::<f64>()
        .ln()
        + max;
    logits.iter().map(|&v| v - lse).collect()
}

/// Backward of `probs = softmax(logits)`: given d(loss)/d(probs), returns
/// d(loss)/d(logits) = p ⊙ (dy − p·dy).
pub fn softmax_backward(probs: &[f64], dprobs: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(dprobs).map(|(p, d)| p * d).sum();
    probs
        .iter()
        .zip(dprobs)
        .map(|(p, d)| p * (d - dot))
        .collect()
}

/// Entropy of a categorical distribution given its logits.
pub fn entropy_from_logits(logits: &[f64]) -> f64 {
    let logp = log_softmax(logits);
    -logp.iter().map(|&lp| lp.exp() * lp).sum::<f64>()
}
