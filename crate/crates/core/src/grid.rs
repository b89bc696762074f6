//! Sample grids: the truncated 1D line and the periodic 2D cell.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Uniform truncated grid on `[-L, L)` with `n` nodes `x_j = -L + j h`,
/// `h = 2L/n`. `n` is even so that `x = 0` is the node `j = n/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub half_width: f64,
    pub n: usize,
    pub h: f64,
}

impl Grid1D {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Validation(format!(
                "grid half-width L = {half_width} must be positive"
            )));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::Validation(format!(
                "grid sample count n = {n} must be even and >= 8"
            )));
        }
        Ok(Self {
            half_width,
            n,
            h: 2.0 * half_width / n as f64,
        })
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Index of the node at `x = 0`.
    pub fn zero_index(&self) -> usize {
        self.n / 2
    }

    pub fn last_node(&self) -> f64 {
        self.node(self.n - 1)
    }
}

/// Periodic rectangular cell with periods `(l1, l2)`, sample counts
/// `(n1, n2)`, nodes `x_i = -l/2 + i h`, and the discrete frequency set
/// `k = 2 pi (m1/l1, m2/l2)` in standard FFT index order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub l1: f64,
    pub l2: f64,
    pub n1: usize,
    pub n2: usize,
}

impl Grid2D {
    pub fn new(l1: f64, l2: f64, n1: usize, n2: usize) -> Result<Self> {
        for (name, l) in [("L1", l1), ("L2", l2)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Validation(format!(
                    "cell period {name} = {l} must be positive"
                )));
            }
        }
        for (name, n) in [("n1", n1), ("n2", n2)] {
            if n < 8 || n % 2 != 0 {
                return Err(Error::Validation(format!(
                    "sample count {name} = {n} must be even and >= 8"
                )));
            }
        }
        Ok(Self { l1, l2, n1, n2 })
    }

    pub fn h1(&self) -> f64 {
        self.l1 / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        self.l2 / self.n2 as f64
    }

    pub fn x1(&self, i: usize) -> f64 {
        -0.5 * self.l1 + i as f64 * self.h1()
    }

    pub fn x2(&self, j: usize) -> f64 {
        -0.5 * self.l2 + j as f64 * self.h2()
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Signed mode index for FFT bin `i` on an axis with `n` samples.
    fn signed_mode(i: usize, n: usize) -> i64 {
        let i = i as i64;
        let n = n as i64;
        if i <= n / 2 - 1 {
            i
        } else {
            i - n
        }
    }

    /// Frequency vector of FFT bin `(i1, i2)`.
    pub fn wavevector(&self, i1: usize, i2: usize) -> (f64, f64) {
        let m1 = Self::signed_mode(i1, self.n1) as f64;
        let m2 = Self::signed_mode(i2, self.n2) as f64;
        (2.0 * PI * m1 / self.l1, 2.0 * PI * m2 / self.l2)
    }

    /// Row-major flat index, `x1` slow and `x2` fast.
    pub fn idx(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n2 + i2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid1d_nodes_and_zero() {
        let g = Grid1D::new(10.0, 16).unwrap();
        assert_eq!(g.h, 1.25);
        assert_eq!(g.node(0), -10.0);
        assert_eq!(g.node(g.zero_index()), 0.0);
        let nodes = g.nodes();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(nodes.len(), 16);
    }

    #[test]
    fn grid1d_rejects_bad_counts() {
        assert!(Grid1D::new(10.0, 7).is_err());
        assert!(Grid1D::new(10.0, 9).is_err());
        assert!(Grid1D::new(-1.0, 16).is_err());
    }

    #[test]
    fn grid2d_frequency_set_contains_zero() {
        let g = Grid2D::new(2.0 * PI, 2.0 * PI, 8, 8).unwrap();
        assert_eq!(g.wavevector(0, 0), (0.0, 0.0));
        // Mode 1 on a 2*pi cell is the unit frequency.
        let (k1, _) = g.wavevector(1, 0);
        assert!((k1 - 1.0).abs() < 1e-15);
        // Upper half maps to negative frequencies.
        let (k1, _) = g.wavevector(7, 0);
        assert!((k1 + 1.0).abs() < 1e-15);
    }
}
