//! Uniform position grid and its discrete-Fourier dual momentum grid.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// A uniform, periodic grid of `n_points` cells covering `[x_min, x_max)`.
///
/// Node `k` sits at `x_min + k·dx`. The momentum grid follows the FFT
/// ordering: index `j` carries `p_j = f_j·dp` with `f_j = j` for `j < n/2`
/// and `f_j = j − n` otherwise, so `dx·dp·n = 2πħ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default = "unit_hbar")]
    pub hbar: f64,
}

fn unit_hbar() -> f64 {
    1.0
}

impl GridSpec {
    pub fn new(n_points: usize, x_min: f64, x_max: f64, hbar: f64) -> Result<Self> {
        let grid = GridSpec {
            n_points,
            x_min,
            x_max,
            hbar,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 8 || !self.n_points.is_power_of_two() {
            return Err(Error::config(format!(
                "grid n_points must be a power of two >= 8, got {}",
                self.n_points
            )));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite()) || self.x_max <= self.x_min {
            return Err(Error::config(format!(
                "degenerate grid interval [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::config(format!("hbar must be positive, got {}", self.hbar)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn dp(&self) -> f64 {
        2.0 * PI * self.hbar / (self.n_points as f64 * self.dx())
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.x(k)).collect()
    }

    /// Momentum of FFT bin `j`.
    pub fn p(&self, j: usize) -> f64 {
        let n = self.n_points as isize;
        let j = j as isize;
        let f = if j < n / 2 { j } else { j - n };
        f as f64 * self.dp()
    }

    /// Momenta in FFT bin order.
    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.p(j)).collect()
    }

    /// Number of nodes in each outer guard band (5% of the grid per side).
    pub fn guard_width(&self) -> usize {
        (self.n_points / 20).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_grid_spacings() {
        let g = GridSpec::new(8, -1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(g.dx(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(g.dp(), PI, epsilon = 1e-15);
    }

    #[test]
    fn wide_grid_spacing() {
        let g = GridSpec::new(256, -20.0, 20.0, 1.0).unwrap();
        assert_relative_eq!(g.dx(), 0.15625, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GridSpec::new(7, -1.0, 1.0, 1.0).is_err());
        assert!(GridSpec::new(4, -1.0, 1.0, 1.0).is_err());
        assert!(GridSpec::new(8, 1.0, 1.0, 1.0).is_err());
        assert!(GridSpec::new(8, -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn fourier_duality() {
        for &(n, a, b, h) in &[(8, -1.0, 1.0, 1.0), (512, -7.5, 30.0, 0.37)] {
            let g = GridSpec::new(n, a, b, h).unwrap();
            let lhs = g.dx() * g.dp() * n as f64;
            assert_relative_eq!(lhs, 2.0 * PI * h, max_relative = 1e-14);
            let ps = g.momenta();
            let lo = ps.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_relative_eq!(lo + hi, -g.dp(), epsilon = 1e-12);
        }
    }
}
