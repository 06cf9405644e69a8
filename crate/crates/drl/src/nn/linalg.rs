//! Row-major dense matrix, just enough for forward and backward passes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend(row);
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    /// y = W x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            y[r] = acc;
        }
        y
    }

    /// out += Wᵀ dy
    pub fn add_t_matvec(&self, dy: &[f64], out: &mut [f64]) {
        debug_assert_eq!(dy.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for r in 0..self.rows {
            let d = dy[r];
            if d == 0.0 {
                continue;
            }
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * d;
            }
        }
    }

    /// self += dy xᵀ (outer-product accumulation for weight gradients).
    pub fn add_outer(&mut self, dy: &[f64], x: &[f64]) {
        debug_assert_eq!(dy.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for r in 0..self.rows {
            let d = dy[r];
            if d == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, v) in row.iter_mut().zip(x) {
                *w += d * v;
            }
        }
    }
}

pub fn add_assign(out: &mut [f64], src: &[f64]) {
    debug_assert_eq!(out.len(), src.len());
    for (o, s) in out.iter_mut().zip(src) {
        *o += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_against_direct_recomputation() {
        // 3x2 layer vs an independently coded matrix multiply.
        let w = Mat::from_rows(vec![vec![1.0, -2.0], vec![0.5, 0.25], vec![-1.5, 3.0]]);
        let x = [0.7, -0.3];
        let y = w.matvec(&x);
        for r in 0..3 {
            let mut acc = 0.0;
            for c in 0..2 {
                acc += w.at(r, c) * x[c];
            }
            assert!((y[r] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn outer_and_transpose() {
        let mut g = Mat::zeros(2, 3);
        g.add_outer(&[2.0, -1.0], &[1.0, 0.5, -0.25]);
        assert_eq!(g.data, vec![2.0, 1.0, -0.5, -1.0, -0.5, 0.25]);

        let mut out = vec![0.0; 3];
        g.add_t_matvec(&[1.0, 1.0], &mut out);
        assert_eq!(out, vec![1.0, 0.5, -0.25]);
    }
}
