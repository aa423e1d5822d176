//! Classical Bartlett beamformer spectrum from a single snapshot.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::ArrayGeometry;
use crate::error::{invalid, Result};
use crate::manifold::ManifoldMatrix;
use crate::spectrum::{AngleGrid, Spectrum};

/// `|a^H(theta_i) x|^2` over the grid, with the manifold built internally.
pub fn bartlett_spectrum(
    geom: &ArrayGeometry,
    snapshot: &[Complex64],
    grid: &AngleGrid,
) -> Result<Spectrum> {
    let manifold = ManifoldMatrix::build(geom, grid)?;
    bartlett_spectrum_with_manifold(&manifold, snapshot)
}

/// Same as [`bartlett_spectrum`] but reusing a precomputed manifold, for
/// benchmark loops that scan many snapshots over one grid.
pub fn bartlett_spectrum_with_manifold(
    manifold: &ManifoldMatrix,
    snapshot: &[Complex64],
) -> Result<Spectrum> {
    let m = manifold.num_elements();
    if snapshot.len() != m {
        return Err(invalid(format!(
            "snapshot has {} entries, array has {m}",
            snapshot.len()
        )));
    }
    // Each score depends only on its own column, so chunked evaluation is
    // exact regardless of the chunking.
    let scores: Vec<f64> = (0..manifold.num_angles())
        .into_par_iter()
        .with_min_len(512)
        .map(|i| {
            let col = manifold.column(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, x) in col.iter().zip(snapshot) {
                acc += c.conj() * x;
            }
            acc.norm_sqr()
        })
        .collect();
    Spectrum::new(manifold.grid().clone(), scores)
}
