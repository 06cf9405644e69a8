//! Parameter initialization: scaled-uniform fan-in for dense blocks,
//! orthogonal for recurrent blocks.

use super::linalg::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Uniform(-a, a) with a = sqrt(3 / fan_in).
pub fn fan_in_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    let a = (3.0 / cols as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
    Mat { rows, cols, data }
}

/// Square orthogonal matrix via modified Gram-Schmidt on a Gaussian draw.
/// Signs are fixed so the result is deterministic for a given stream.
pub fn orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Mat {
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    for i in 0..n {
        for j in 0..i {
            let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            for k in 0..n {
                cols[i][k] -= dot * cols[j][k];
            }
        }
        let norm: f64 = cols[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        // A degenerate draw is vanishingly unlikely; renormalize or fall back
        // to a unit vector so the result is always orthonormal.
        if norm > 1e-12 {
            let inv = 1.0 / norm;
            for v in &mut cols[i] {
                *v *= inv;
            }
        } else {
            cols[i] = (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect();
        }
        if cols[i][0] < 0.0 {
            for v in &mut cols[i] {
                *v = -*v;
            }
        }
    }
    let mut m = Mat::zeros(n, n);
    for (c, col) in cols.iter().enumerate() {
        for r in 0..n {
            *m.at_mut(r, c) = col[r];
        }
    }
    m
}
