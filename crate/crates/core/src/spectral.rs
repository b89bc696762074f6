//! Periodic 2D sample fields and the fixed Fourier-transform convention.
//!
//! Convention (declared once, used everywhere): with cell nodes
//! `x_j = x_0 + j h`, the forward transform is the plain DFT
//! `u_hat(k) = sum_j u(x_j) exp(-i k . (x_j - x_0))` and the inverse carries
//! `exp(+i k . (x_j - x_0))` with a `1/(n1 n2)` normalization. Every
//! multiplier applied in this crate is real and even, so results are
//! independent of the cell origin phase.

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::par;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Marker recording the transform convention carried by every field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FourierConvention;

/// Real samples on a periodic 2D grid, row-major with `x1` slow.
#[derive(Debug, Clone)]
pub struct SpectralField2D {
    pub grid: Grid2D,
    pub samples: Vec<f64>,
    pub fourier_convention: FourierConvention,
}

impl SpectralField2D {
    pub fn new(grid: Grid2D, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Validation(format!(
                "sample count {} does not match grid size {}",
                samples.len(),
                grid.len()
            )));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("field samples must be finite".into()));
        }
        Ok(Self {
            grid,
            samples,
            fourier_convention: FourierConvention,
        })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.len()],
            fourier_convention: FourierConvention,
        }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut samples = Vec::with_capacity(grid.len());
        for i1 in 0..grid.n1 {
            let x1 = grid.x1(i1);
            for i2 in 0..grid.n2 {
                samples.push(f(x1, grid.x2(i2)));
            }
        }
        Self {
            grid,
            samples,
            fourier_convention: FourierConvention,
        }
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Forward transform of the samples.
    pub fn forward(&self) -> Vec<Complex64> {
        let buf: Vec<Complex64> = self.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2(&self.grid, buf, false)
    }

    /// Applies a real multiplier `m(k1, k2)` in Fourier space and returns the
    /// resulting real field together with the largest imaginary residue of
    /// the back transform.
    pub fn apply_real_multiplier(&self, m: impl Fn(f64, f64) -> f64 + Sync) -> (Self, f64) {
        let mut spec = self.forward();
        for i1 in 0..self.grid.n1 {
            for i2 in 0..self.grid.n2 {
                let (k1, k2) = self.grid.wavevector(i1, i2);
                spec[self.grid.idx(i1, i2)] *= m(k1, k2);
            }
        }
        let back = fft2(&self.grid, spec, true);
        let mut max_imag = 0.0_f64;
        let samples = back
            .iter()
            .map(|c| {
                max_imag = max_imag.max(c.im.abs());
                c.re
            })
            .collect();
        (
            Self {
                grid: self.grid,
                samples,
                fourier_convention: FourierConvention,
            },
            max_imag,
        )
    }

    /// Round trip forward-then-inverse; used by the construction invariant.
    pub fn round_trip_error(&self) -> f64 {
        let spec = self.forward();
        let back = fft2(&self.grid, spec, true);
        let scale = self.max_abs().max(1e-300);
        self.samples
            .iter()
            .zip(back.iter())
            .map(|(&v, c)| ((c.re - v).abs() + c.im.abs()) / scale)
            .fold(0.0_f64, f64::max)
    }
}

/// Below this size the per-row task overhead outweighs the 2D transform
/// itself (measured up to 512x512 on small core counts) and [`fft2`] defers
/// to the sequential body.
const FFT_PAR_THRESHOLD: usize = 1 << 20;

/// 2D FFT over the row-major buffer; `inverse` applies the `1/(n1 n2)`
/// normalization. On large grids rows transform in parallel (order-fixed),
/// then columns via transpose; results are bit-identical to [`fft2_seq`].
pub fn fft2(grid: &Grid2D, buf: Vec<Complex64>, inverse: bool) -> Vec<Complex64> {
    if grid.len() < FFT_PAR_THRESHOLD {
        return fft2_seq(grid, buf, inverse);
    }
    fft2_par(grid, buf, inverse)
}

fn fft2_par(grid: &Grid2D, mut buf: Vec<Complex64>, inverse: bool) -> Vec<Complex64> {
    let (n1, n2) = (grid.n1, grid.n2);
    let mut planner = FftPlanner::new();
    let fft_rows = if inverse {
        planner.plan_fft_inverse(n2)
    } else {
        planner.plan_fft_forward(n2)
    };
    let fft_cols = if inverse {
        planner.plan_fft_inverse(n1)
    } else {
        planner.plan_fft_forward(n1)
    };

    let rows: Vec<Vec<Complex64>> = par::ordered_map(n1, |i| {
        let mut row = buf[i * n2..(i + 1) * n2].to_vec();
        fft_rows.process(&mut row);
        row
    });
    for (i, row) in rows.into_iter().enumerate() {
        buf[i * n2..(i + 1) * n2].copy_from_slice(&row);
    }

    let cols: Vec<Vec<Complex64>> = par::ordered_map(n2, |j| {
        let mut col: Vec<Complex64> = (0..n1).map(|i| buf[i * n2 + j]).collect();
        fft_cols.process(&mut col);
        col
    });
    for (j, col) in cols.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            buf[i * n2 + j] = v;
        }
    }

    if inverse {
        let scale = 1.0 / (n1 * n2) as f64;
        for v in &mut buf {
            *v *= scale;
        }
    }
    buf
}

/// Sequential twin of [`fft2`] for the benchmark suite.
pub fn fft2_seq(grid: &Grid2D, mut buf: Vec<Complex64>, inverse: bool) -> Vec<Complex64> {
    let (n1, n2) = (grid.n1, grid.n2);
    let mut planner = FftPlanner::new();
    let fft_rows = if inverse {
        planner.plan_fft_inverse(n2)
    } else {
        planner.plan_fft_forward(n2)
    };
    let fft_cols = if inverse {
        planner.plan_fft_inverse(n1)
    } else {
        planner.plan_fft_forward(n1)
    };
    let rows: Vec<Vec<Complex64>> = par::ordered_map_seq(n1, |i| {
        let mut row = buf[i * n2..(i + 1) * n2].to_vec();
        fft_rows.process(&mut row);
        row
    });
    for (i, row) in rows.into_iter().enumerate() {
        buf[i * n2..(i + 1) * n2].copy_from_slice(&row);
    }
    let cols: Vec<Vec<Complex64>> = par::ordered_map_seq(n2, |j| {
        let mut col: Vec<Complex64> = (0..n1).map(|i| buf[i * n2 + j]).collect();
        fft_cols.process(&mut col);
        col
    });
    for (j, col) in cols.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            buf[i * n2 + j] = v;
        }
    }
    if inverse {
        let scale = 1.0 / (n1 * n2) as f64;
        for v in &mut buf {
            *v *= scale;
        }
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn round_trip_single_mode() {
        let grid = Grid2D::new(2.0 * PI, 2.0 * PI, 16, 16).unwrap();
        let f = SpectralField2D::from_fn(grid, |x1, x2| (x1).cos() + 0.3 * (2.0 * x2).sin());
        assert!(f.round_trip_error() <= 1e-12);
    }

    #[test]
    fn forward_locates_single_mode() {
        let grid = Grid2D::new(2.0 * PI, 2.0 * PI, 16, 8).unwrap();
        let f = SpectralField2D::from_fn(grid, |x1, _| (2.0 * x1).cos());
        let spec = f.forward();
        // cos(2 x1) lives in bins (2, 0) and (n1-2, 0), each with weight N/2.
        let n = grid.len() as f64;
        let hot = spec[grid.idx(2, 0)];
        assert!((hot.re - n / 2.0).abs() < 1e-9 * n);
        let cold: f64 = (0..grid.n1)
            .flat_map(|i1| (0..grid.n2).map(move |i2| (i1, i2)))
            .filter(|&(i1, i2)| !(i2 == 0 && (i1 == 2 || i1 == grid.n1 - 2)))
            .map(|(i1, i2)| spec[grid.idx(i1, i2)].norm())
            .fold(0.0, f64::max);
        assert!(cold < 1e-9 * n);
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let grid = Grid2D::new(1.0, 1.0, 8, 8).unwrap();
        assert!(SpectralField2D::new(grid, vec![0.0; 63]).is_err());
        assert!(SpectralField2D::new(grid, vec![f64::NAN; 64]).is_err());
    }
}
