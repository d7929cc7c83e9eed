//! Cached-plan 2D FFT over row-major complex buffers.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub type C64 = Complex<f64>;

/// Forward/inverse 2D FFT for one fixed spatial size.
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    fn transform(&self, data: &mut [C64], inverse: bool) {
        debug_assert_eq!(data.len(), self.len());
        let row = if inverse { &self.row_inv } else { &self.row_fwd };
        let col = if inverse { &self.col_inv } else { &self.col_fwd };
        for r in data.chunks_exact_mut(self.width) {
            row.process(r);
        }
        let mut t = transpose(data, self.height, self.width);
        for c in t.chunks_exact_mut(self.height) {
            col.process(c);
        }
        let back = transpose(&t, self.width, self.height);
        data.copy_from_slice(&back);
        if inverse {
            let scale = 1.0 / self.len() as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.transform(data, false);
    }

    pub fn inverse(&self, data: &mut [C64]) {
        self.transform(data, true);
    }

    pub fn forward_real(&self, data: &[f64]) -> Vec<C64> {
        let mut buf: Vec<C64> = data.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }
}

fn transpose(data: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let fft = Fft2::new(4, 6);
        let orig: Vec<f64> = (0..24).map(|v| (v as f64).sin()).collect();
        let mut buf = fft.forward_real(&orig);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(orig.iter()) {
            assert!((a.re - b).abs() < 1e-12);
            assert!(a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn dc_bin_is_sum() {
        let fft = Fft2::new(2, 3);
        let data = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let spec = fft.forward_real(&data);
        assert!((spec[0].re - 21.0).abs() < 1e-12);
        assert!(spec[0].im.abs() < 1e-12);
    }
}
