//! Gated recurrent unit with a hand-derived backward pass.
//!
//! Equations (update gate z, reset gate r, candidate ĥ):
//!   z  = σ(Wz x + Uz h + bz)
//!   r  = σ(Wr x + Ur h + br)
//!   ĥ  = tanh(Wh x + Uh (r ⊙ h) + bh)
//!   h' = (1 − z) ⊙ h + z ⊙ ĥ

use super::linalg::{add_assign, Mat};
use crate::error::{DrlError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    pub wz: Mat,
    pub uz: Mat,
    pub bz: Vec<f64>,
    pub wr: Mat,
    pub ur: Mat,
    pub br: Vec<f64>,
    pub wh: Mat,
    pub uh: Mat,
    pub bh: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub rh: Vec<f64>,
    pub hcand: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GruGrad {
    pub wz: Mat,
    pub uz: Mat,
    pub bz: Vec<f64>,
    pub wr: Mat,
    pub ur: Mat,
    pub br: Vec<f64>,
    pub wh: Mat,
    pub uh: Mat,
    pub bh: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl GruCell {
    pub fn in_dim(&self) -> usize {
        self.wz.cols
    }

    pub fn hidden_dim(&self) -> usize {
        self.wz.rows
    }

    /// One step. The cell output equals the new hidden state.
    pub fn step(&self, x: &[f64], h: &[f64]) -> Result<(Vec<f64>, GruCache)> {
        if x.len() != self.in_dim() || h.len() != self.hidden_dim() {
            return Err(DrlError::contract(format!(
                "gru shapes: input {} (want {}), hidden {} (want {})",
                x.len(),
                self.in_dim(),
                h.len(),
                self.hidden_dim()
            )));
        }
        let n = self.hidden_dim();

        let mut z = self.wz.matvec(x);
        let uzh = self.uz.matvec(h);
        for i in 0..n {
            z[i] = sigmoid(z[i] + uzh[i] + self.bz[i]);
        }
        let mut r = self.wr.matvec(x);
        let urh = self.ur.matvec(h);
        for i in 0..n {
            r[i] = sigmoid(r[i] + urh[i] + self.br[i]);
        }
        let rh: Vec<f64> = r.iter().zip(h).map(|(r, h)| r * h).collect();
        let mut hcand = self.wh.matvec(x);
        let uhrh = self.uh.matvec(&rh);
        for i in 0..n {
            hcand[i] = (hcand[i] + uhrh[i] + self.bh[i]).tanh();
        }
        // Convex mixture keeps h' componentwise between h and the candidate.
        let hnext: Vec<f64> = (0..n)
            .map(|i| (1.0 - z[i]) * h[i] + z[i] * hcand[i])
            .collect();
        Ok((
            hnext,
            GruCache {
                x: x.to_vec(),
                h: h.to_vec(),
                z,
                r,
                rh,
                hcand,
            },
        ))
    }

    /// Backward through one step: given d(loss)/d(h'), accumulates parameter
    /// gradients and returns (d(loss)/d(x), d(loss)/d(h)).
    pub fn backward(
        &self,
        cache: &GruCache,
        dhnext: &[f64],
        grad: &mut GruGrad,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = self.hidden_dim();
        debug_assert_eq!(dhnext.len(), n);
        let mut dx = vec![0.0; self.in_dim()];
        let mut dh = vec![0.0; n];

        // Mixture node.
        let dz: Vec<f64> = (0..n)
            .map(|i| dhnext[i] * (cache.hcand[i] - cache.h[i]))
            .collect();
        let dhcand: Vec<f64> = (0..n).map(|i| dhnext[i] * cache.z[i]).collect();
        for i in 0..n {
            dh[i] += dhnext[i] * (1.0 - cache.z[i]);
        }

        // Candidate (tanh) branch.
        let da_h: Vec<f64> = (0..n)
            .map(|i| dhcand[i] * (1.0 - cache.hcand[i] * cache.hcand[i]))
            .collect();
        grad.wh.add_outer(&da_h, &cache.x);
        grad.uh.add_outer(&da_h, &cache.rh);
        add_assign(&mut grad.bh, &da_h);
        self.wh.add_t_matvec(&da_h, &mut dx);
        let mut drh = vec![0.0; n];
        self.uh.add_t_matvec(&da_h, &mut drh);
        let dr: Vec<f64> = (0..n).map(|i| drh[i] * cache.h[i]).collect();
        for i in 0..n {
            dh[i] += drh[i] * cache.r[i];
        }

        // Reset gate branch.
        let da_r: Vec<f64> = (0..n)
            .map(|i| dr[i] * cache.r[i] * (1.0 - cache.r[i]))
            .collect();
        grad.wr.add_outer(&da_r, &cache.x);
        grad.ur.add_outer(&da_r, &cache.h);
        add_assign(&mut grad.br, &da_r);
        self.wr.add_t_matvec(&da_r, &mut dx);
        self.ur.add_t_matvec(&da_r, &mut dh);

        // Update gate branch.
        let da_z: Vec<f64> = (0..n)
            .map(|i| dz[i] * cache.z[i] * (1.0 - cache.z[i]))
            .collect();
        grad.wz.add_outer(&da_z, &cache.x);
        grad.uz.add_outer(&da_z, &cache.h);
        add_assign(&mut grad.bz, &da_z);
        self.wz.add_t_matvec(&da_z, &mut dx);
        self.uz.add_t_matvec(&da_z, &mut dh);

        (dx, dh)
    }

    pub fn zero_grad(&self) -> GruGrad {
        GruGrad {
            wz: Mat::zeros(self.wz.rows, self.wz.cols),
            uz: Mat::zeros(self.uz.rows, self.uz.cols),
            bz: vec![0.0; self.bz.len()],
            wr: Mat::zeros(self.wr.rows, self.wr.cols),
            ur: Mat::zeros(self.ur.rows, self.ur.cols),
            br: vec![0.0; self.br.len()],
            wh: Mat::zeros(self.wh.rows, self.wh.cols),
            uh: Mat::zeros(self.uh.rows, self.uh.cols),
            bh: vec![0.0; self.bh.len()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init::fan_in_uniform;
    use crate::rng::RngStream;

    fn small_cell(rng: &mut rand_chacha::ChaCha8Rng) -> GruCell {
        GruCell {
            wz: fan_in_uniform(4, 3, rng),
            uz: fan_in_uniform(4, 4, rng),
            bz: vec![0.0; 4],
            wr: fan_in_uniform(4, 3, rng),
            ur: fan_in_uniform(4, 4, rng),
            br: vec![0.0; 4],
            wh: fan_in_uniform(4, 3, rng),
            uh: fan_in_uniform(4, 4, rng),
            bh: vec![0.0; 4],
        }
    }

    #[test]
    fn forced_update_gate_identities() {
        let mut rng = RngStream::new(11, 0).rng();
        let mut cell = small_cell(&mut rng);
        let x = [0.3, -0.7, 0.2];
        let h = [0.5, -0.25, 0.1, 0.9];

        // bz = -40 drives z to 0: h' = h.
        cell.bz = vec![-40.0; 4];
        let (hnext, _) = cell.step(&x, &h).unwrap();
        for (a, b) in hnext.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }

        // bz = +40 drives z to 1: h' = candidate.
        cell.bz = vec![40.0; 4];
        let (hnext, cache) = cell.step(&x, &h).unwrap();
        for (a, b) in hnext.iter().zip(&cache.hcand) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hidden_stays_in_convex_hull() {
        let mut rng = RngStream::new(5, 1).rng();
        let cell = small_cell(&mut rng);
        let x = [1.0, 2.0, -3.0];
        let h = [0.9, -0.9, 0.0, 0.4];
        let (hnext, cache) = cell.step(&x, &h).unwrap();
        for i in 0..4 {
            let lo = h[i].min(cache.hcand[i]) - 1e-12;
            let hi = h[i].max(cache.hcand[i]) + 1e-12;
            assert!(hnext[i] >= lo && hnext[i] <= hi);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = RngStream::new(1, 0).rng();
        let cell = small_cell(&mut rng);
        assert!(cell.step(&[0.0; 2], &[0.0; 4]).is_err());
        assert!(cell.step(&[0.0; 3], &[0.0; 2]).is_err());
    }
}
