//! Array manifold matrix: steering vectors stacked column-wise over a grid.
//!
//! Built once per grid and shared read-only across trials; the per-column
//! layout keeps both `A s` and `A^H r` products cache-friendly.

use num_complex::Complex64;

use crate::array::{inner_product, steering_vector, ArrayGeometry};
use crate::error::{invalid, Result};
use crate::spectrum::AngleGrid;

/// Column-major complex matrix whose i-th column is `a(theta_i)`.
#[derive(Debug, Clone)]
pub struct ManifoldMatrix {
    num_elements: usize,
    grid: AngleGrid,
    data: Vec<Complex64>,
}

impl ManifoldMatrix {
    pub fn build(geom: &ArrayGeometry, grid: &AngleGrid) -> Result<Self> {
        if grid.is_empty() {
            return Err(invalid("manifold grid must be nonempty"));
        }
        let m = geom.num_elements();
        let mut data = Vec::with_capacity(m * grid.len());
        for &theta in grid.angles() {
            data.extend(steering_vector(geom, theta)?);
        }
        Ok(ManifoldMatrix {
            num_elements: m,
            grid: grid.clone(),
            data,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn num_angles(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn column(&self, i: usize) -> &[Complex64] {
        let m = self.num_elements;
        &self.data[i * m..(i + 1) * m]
    }

    /// `A s` for a dense coefficient vector of length `num_angles`.
    pub fn mul_vec(&self, s: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(s.len(), self.num_angles());
        let m = self.num_elements;
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        for (i, &si) in s.iter().enumerate() {
            if si.re == 0.0 && si.im == 0.0 {
                continue;
            }
            let col = self.column(i);
            for (o, &c) in out.iter_mut().zip(col) {
                *o += c * si;
            }
        }
        out
    }

    /// `A^H r` for a vector of length `num_elements`.
    pub fn mul_adjoint(&self, r: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(r.len(), self.num_elements);
        (0..self.num_angles())
            .map(|i| inner_product(self.column(i), r))
            .collect()
    }

    /// The `M x M` Gram matrix `A A^H`, row-major.
    pub fn aat(&self) -> Vec<Complex64> {
        let m = self.num_elements;
        let mut out = vec![Complex64::new(0.0, 0.0); m * m];
        for i in 0..self.num_angles() {
            let col = self.column(i);
            for r in 0..m {
                for c in 0..m {
                    out[r * m + c] += col[r] * col[c].conj();
                }
            }
        }
        out
    }
}
