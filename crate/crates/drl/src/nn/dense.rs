//! Dense layers and feed-forward stacks with explicit backward passes.

use super::linalg::{add_assign, Mat};
use crate::error::{DrlError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn deriv_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub w: Mat,
    pub b: Vec<f64>,
    pub act: Activation,
}

/// Forward cache: the input and the activation output.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseGrad {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl DenseLayer {
    pub fn in_dim(&self) -> usize {
        self.w.cols
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, DenseCache)> {
        if x.len() != self.in_dim() {
            return Err(DrlError::contract(format!(
                "dense input length {} does not match in-dim {}",
                x.len(),
                self.in_dim()
            )));
        }
        let mut y = self.w.matvec(x);
        for (v, b) in y.iter_mut().zip(&self.b) {
            *v = self.act.apply(*v + b);
        }
        Ok((
            y.clone(),
            DenseCache {
                x: x.to_vec(),
                y,
            },
        ))
    }

    /// Backward pass: given d(loss)/d(output), accumulates parameter
    /// gradients into `grad` and returns d(loss)/d(input).
    pub fn backward(&self, cache: &DenseCache, dy: &[f64], grad: &mut DenseGrad) -> Vec<f64> {
        debug_assert_eq!(dy.len(), self.out_dim());
        let dz: Vec<f64> = dy
            .iter()
            .zip(&cache.y)
            .map(|(&d, &y)| d * self.act.deriv_from_output(y))
            .collect();
        grad.w.add_outer(&dz, &cache.x);
        add_assign(&mut grad.b, &dz);
        let mut dx = vec![0.0; self.in_dim()];
        self.w.add_t_matvec(&dz, &mut dx);
        dx
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    pub layers: Vec<DenseCache>,
}

#[derive(Debug, Clone)]
pub struct MlpGrad {
    pub layers: Vec<DenseGrad>,
}

impl Mlp {
    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim())
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let (y, cache) = layer.forward(&cur)?;
            caches.push(cache);
            cur = y;
        }
        Ok((cur, MlpCache { layers: caches }))
    }

    pub fn backward(&self, cache: &MlpCache, dy: &[f64], grad: &mut MlpGrad) -> Vec<f64> {
        let mut d = dy.to_vec();
        for i in (0..self.layers.len()).rev() {
            d = self.layers[i].backward(&cache.layers[i], &d, &mut grad.layers[i]);
        }
        d
    }

    pub fn zero_grad(&self) -> MlpGrad {
        MlpGrad {
            layers: self
                .layers
                .iter()
                .map(|l| DenseGrad {
                    w: Mat::zeros(l.w.rows, l.w.cols),
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
        }
    }
}
