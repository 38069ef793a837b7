//! Thin 2D FFT wrapper over rustfft: row transforms followed by column
//! transforms on a scratch buffer. Inverse includes the 1/(h*w) scaling.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) struct Fft2 {
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
        Fft2 {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn transform(&self, data: &mut [Complex<f64>], forward: bool) {
        debug_assert_eq!(data.len(), self.height * self.width);
        let row = if forward { &self.row_fwd } else { &self.row_inv };
        let col = if forward { &self.col_fwd } else { &self.col_inv };
        for r in 0..self.height {
            row.process(&mut data[r * self.width..(r + 1) * self.width]);
        }
        let mut column = vec![Complex::default(); self.height];
        for c in 0..self.width {
            for r in 0..self.height {
                column[r] = data[r * self.width + c];
            }
            col.process(&mut column);
            for r in 0..self.height {
                data[r * self.width + c] = column[r];
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex<f64>]) {
        self.transform(data, true);
    }

    pub fn inverse(&self, data: &mut [Complex<f64>]) {
        self.transform(data, false);
        let scale = 1.0 / (self.height * self.width) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

pub(crate) fn to_complex(data: &[f64]) -> Vec<Complex<f64>> {
    data.iter().map(|&v| Complex::new(v, 0.0)).collect()
}
