//! Canonical flat-vector view of parameter trees. Parameters and their
//! gradient mirrors flatten in the same order, so the optimizer and the
//! finite-difference checks can treat everything as one `Vec<f64>`.

use super::dense::{DenseLayer, Mlp, MlpGrad};
use super::gru::{GruCell, GruGrad};
use super::linalg::Mat;

pub trait Flatten {
    fn flat_len(&self) -> usize;
    fn write_flat(&self, out: &mut Vec<f64>);
    /// Reads values back in `write_flat` order, advancing `pos`.
    fn read_flat(&mut self, src: &[f64], pos: &mut usize);

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        self.write_flat(&mut out);
        out
    }

    fn load_flat(&mut self, src: &[f64]) {
        let mut pos = 0;
        self.read_flat(src, &mut pos);
        assert_eq!(pos, src.len(), "flat vector length mismatch");
    }
}

impl Flatten for Vec<f64> {
    fn flat_len(&self) -> usize {
        self.len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        let n = self.len();
        self.copy_from_slice(&src[*pos..*pos + n]);
        *pos += n;
    }
}

impl Flatten for Mat {
    fn flat_len(&self) -> usize {
        self.data.len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.data);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        let n = self.data.len();
        self.data.copy_from_slice(&src[*pos..*pos + n]);
        *pos += n;
    }
}

impl Flatten for DenseLayer {
    fn flat_len(&self) -> usize {
        self.w.flat_len() + self.b.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.w.write_flat(out);
        self.b.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        self.w.read_flat(src, pos);
        self.b.read_flat(src, pos);
    }
}

impl Flatten for Mlp {
    fn flat_len(&self) -> usize {
        self.layers.iter().map(|l| l.flat_len()).sum()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            l.write_flat(out);
        }
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        for l in &mut self.layers {
            l.read_flat(src, pos);
        }
    }
}

impl Flatten for MlpGrad {
    fn flat_len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.flat_len() + l.b.flat_len())
            .sum()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            l.w.write_flat(out);
            l.b.write_flat(out);
        }
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        for l in &mut self.layers {
            l.w.read_flat(src, pos);
            l.b.read_flat(src, pos);
        }
    }
}

impl Flatten for GruCell {
    fn flat_len(&self) -> usize {
        self.wz.flat_len()
            + self.uz.flat_len()
            + self.bz.flat_len()
            + self.wr.flat_len()
            + self.ur.flat_len()
            + self.br.flat_len()
            + self.wh.flat_len()
            + self.uh.flat_len()
            + self.bh.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.wz.write_flat(out);
        self.uz.write_flat(out);
        self.bz.write_flat(out);
        self.wr.write_flat(out);
        self.ur.write_flat(out);
        self.br.write_flat(out);
        self.wh.write_flat(out);
        self.uh.write_flat(out);
        self.bh.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        self.wz.read_flat(src, pos);
        self.uz.read_flat(src, pos);
        self.bz.read_flat(src, pos);
        self.wr.read_flat(src, pos);
        self.ur.read_flat(src, pos);
        self.br.read_flat(src, pos);
        self.wh.read_flat(src, pos);
        self.uh.read_flat(src, pos);
        self.bh.read_flat(src, pos);
    }
}

impl Flatten for GruGrad {
    fn flat_len(&self) -> usize {
        self.wz.flat_len()
            + self.uz.flat_len()
            + self.bz.flat_len()
            + self.wr.flat_len()
            + self.ur.flat_len()
            + self.br.flat_len()
            + self.wh.flat_len()
            + self.uh.flat_len()
            + self.bh.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.wz.write_flat(out);
        self.uz.write_flat(out);
        self.bz.write_flat(out);
        self.wr.write_flat(out);
        self.ur.write_flat(out);
        self.br.write_flat(out);
        self.wh.write_flat(out);
        self.uh.write_flat(out);
        self.bh.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        self.wz.read_flat(src, pos);
        self.uz.read_flat(src, pos);
        self.bz.read_flat(src, pos);
        self.wr.read_flat(src, pos);
        self.ur.read_flat(src, pos);
        self.br.read_flat(src, pos);
        self.wh.read_flat(src, pos);
        self.uh.read_flat(src, pos);
        self.bh.read_flat(src, pos);
    }
}
