//! Periodic Fourier transforms on [`Grid`]s: spectral Laplacian, gradient
//! energy and circular convolution.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::heat_kernel::Grid;

/// FFT plans and scratch space for one grid.
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k2_axis: Vec<f64>,
    buf: Vec<Complex64>,
    column: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let n = grid.points;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let dk = 2.0 * PI / (2.0 * grid.half_width);
        let k2_axis = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                (m * dk).powi(2)
            })
            .collect();
        Self {
            grid,
            forward,
            inverse,
            k2_axis,
            buf: vec![Complex64::default(); grid.len()],
            column: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn transform(&mut self, inverse: bool) {
        let n = self.grid.points;
        let plan = if inverse { &self.inverse } else { &self.forward };
        // rows (the only axis in 1-D)
        for row in self.buf.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut self.scratch);
        }
        if self.grid.dim == 2 {
            for c in 0..n {
                for r in 0..n {
                    self.column[r] = self.buf[r * n + c];
                }
                plan.process_with_scratch(&mut self.column, &mut self.scratch);
                for r in 0..n {
                    self.buf[r * n + c] = self.column[r];
                }
            }
        }
    }

    fn load(&mut self, values: &[f64]) {
        for (b, &v) in self.buf.iter_mut().zip(values) {
            *b = Complex64::new(v, 0.0);
        }
    }

    fn k2(&self, idx: usize) -> f64 {
        let n = self.grid.points;
        if self.grid.dim == 1 {
            self.k2_axis[idx]
        } else {
            self.k2_axis[idx / n] + self.k2_axis[idx % n]
        }
    }

    /// Spectral Laplacian of `values` written into `out`.
    pub fn laplacian(&mut self, values: &[f64], out: &mut [f64]) {
        self.load(values);
        self.transform(false);
        let scale = 1.0 / self.grid.len() as f64;
        for idx in 0..self.buf.len() {
            let k2 = self.k2(idx);
            self.buf[idx] *= -k2 * scale;
        }
        self.transform(true);
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re;
        }
    }

    /// `∫ |∇u|² dx` by Parseval.
    pub fn gradient_energy(&mut self, values: &[f64]) -> f64 {
        self.load(values);
        self.transform(false);
        let total: f64 = (0..self.buf.len()).map(|idx| self.k2(idx) * self.buf[idx].norm_sqr()).sum();
        total * self.grid.cell_volume() / self.grid.len() as f64
    }

    /// Circular convolution `Σ_y a(y) b(x-y) dxⁿ` with the origin at the
    /// grid centre.
    pub fn convolve(&mut self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.grid.points;
        self.load(b);
        self.transform(false);
        let fb = self.buf.clone();
        self.load(a);
        self.transform(false);
        let scale = self.grid.cell_volume() / self.grid.len() as f64;
        for (x, y) in self.buf.iter_mut().zip(&fb) {
            *x *= *y * scale;
        }
        self.transform(true);
        // undo the double offset of the origin: shift every axis by N/2
        let half = n / 2;
        let mut out = vec![0.0; self.grid.len()];
        if self.grid.dim == 1 {
            for m in 0..n {
                out[m] = self.buf[(m + half) % n].re;
            }
        } else {
            for r in 0..n {
                for c in 0..n {
                    out[r * n + c] = self.buf[((r + half) % n) * n + (c + half) % n].re;
                }
            }
        }
        out
    }
}
