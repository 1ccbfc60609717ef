//! Multi-dimensional complex FFT on a flat row-major cube `[n; dim]`.
//!
//! Both directions are unnormalised: `forward` uses `e^{-i}`, `inverse` uses `e^{+i}`.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

const TILE: usize = 32;

#[derive(Clone)]
pub struct FftNd {
    n: usize,
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("n", &self.n).field("dim", &self.dim).finish()
    }
}

impl FftNd {
    pub fn new(n: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftNd {
            n,
            dim,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(self.fwd.as_ref(), data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(self.inv.as_ref(), data);
    }

    fn run(&self, fft: &dyn Fft<f64>, data: &mut [Complex64]) {
        let n = self.n;
        let total = self.len();
        assert_eq!(data.len(), total, "buffer does not match grid size");
        let zero = Complex64::new(0.0, 0.0);
        let mut scratch = vec![zero; fft.get_inplace_scratch_len()];
        // innermost axis is contiguous
        fft.process_with_scratch(data, &mut scratch);
        let mut buf = vec![zero; n * TILE];
        for axis in 0..self.dim.saturating_sub(1) {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..total).step_by(block) {
                let mut j0 = 0;
                while j0 < stride {
                    let b = TILE.min(stride - j0);
                    for k in 0..n {
                        let row = base + k * stride + j0;
                        for j in 0..b {
                            buf[j * n + k] = data[row + j];
                        }
                    }
                    fft.process_with_scratch(&mut buf[..b * n], &mut scratch);
                    for k in 0..n {
                        let row = base + k * stride + j0;
                        for j in 0..b {
                            data[row + j] = buf[j * n + k];
                        }
                    }
                    j0 += b;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], n: usize, dim: usize, sign: f64) -> Vec<Complex64> {
        let total = n.pow(dim as u32);
        let coords = |mut i: usize| {
            let mut c = vec![0usize; dim];
            for a in (0..dim).rev() {
                c[a] = i % n;
                i /= n;
            }
            c
        };
        (0..total)
            .map(|k| {
                let kc = coords(k);
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, v) in data.iter().enumerate() {
                    let xc = coords(x);
                    let phase: usize = kc.iter().zip(&xc).map(|(a, b)| a * b).sum();
                    let ang = sign * 2.0 * std::f64::consts::PI * (phase % n) as f64 / n as f64;
                    acc += v * Complex64::from_polar(1.0, ang);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_in_three_dimensions() {
        let (n, dim) = (4, 3);
        let data: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let plan = FftNd::new(n, dim);
        let mut a = data.clone();
        plan.forward(&mut a);
        let b = naive_dft(&data, n, dim, -1.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
        plan.inverse(&mut a);
        for (x, y) in a.iter().zip(&data) {
            assert!((x / 64.0 - y).norm() < 1e-13);
        }
    }

    #[test]
    fn tiles_cover_long_strides() {
        // stride larger than TILE on the leading axis
        let (n, dim) = (8, 3);
        let data: Vec<Complex64> = (0..512).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let plan = FftNd::new(n, dim);
        let mut a = data.clone();
        plan.forward(&mut a);
        let b = naive_dft(&data, n, dim, -1.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-8 * (1.0 + y.norm()));
        }
    }
}
