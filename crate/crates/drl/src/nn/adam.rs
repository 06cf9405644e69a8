//! Adam over flat parameter vectors, with optional global-norm clipping.

use crate::error::{DrlError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global-norm clip applied to the gradient before the update; `None`
    /// disables clipping.
    pub clip: Option<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64, clip: Option<f64>) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip,
        }
    }

    /// One update in place. Returns the pre-clip global gradient norm.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<f64> {
        assert_eq!(params.len(), self.m.len(), "parameter shape mismatch");
        assert_eq!(grad.len(), self.m.len(), "gradient shape mismatch");
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(DrlError::Training(
                "non-finite gradient in optimizer step".to_string(),
            ));
        }
        let scale = match self.clip {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i] * scale;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(norm)
    }
}
