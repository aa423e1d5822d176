//! Spatial spectrum of the trained scoring network: scan any angle set,
//! uniform or not, with one forward pass per hypothesis angle.

use num_complex::Complex64;

use crate::array::{steering_vector, ArrayGeometry};
use crate::error::{invalid, Result};
use crate::net::{encode_input_into, forward_batch, ModelParams};
use crate::spectrum::{AngleGrid, Spectrum};

const SCAN_BATCH: usize = 512;

/// Score every grid angle with the network. The grid may be irregular; each
/// score is a pointwise function of `(snapshot, angle, sigma_v)`, so chunked
/// evaluation is bit-exact.
pub fn net_spectrum(
    model: &ModelParams,
    geom: &ArrayGeometry,
    snapshot: &[Complex64],
    sigma_v: f64,
    grid: &AngleGrid,
) -> Result<Spectrum> {
    let m = geom.num_elements();
    if snapshot.len() != m {
        return Err(invalid(format!(
            "snapshot has {} entries, array has {m}",
            snapshot.len()
        )));
    }
    if model.input_dim() != 4 * m + 1 {
        return Err(invalid(format!(
            "model input width {} does not match 4M+1 = {}",
            model.input_dim(),
            4 * m + 1
        )));
    }
    if !sigma_v.is_finite() || sigma_v < 0.0 {
        return Err(invalid(format!("sigma_v must be finite and >= 0, got {sigma_v}")));
    }
    let mut scores = Vec::with_capacity(grid.len());
    let mut batch: Vec<f64> = Vec::with_capacity(SCAN_BATCH * model.input_dim());
    let angles = grid.angles();
    let mut next = 0;
    while next < angles.len() {
        let take = SCAN_BATCH.min(angles.len() - next);
        batch.clear();
        for &theta in &angles[next..next + take] {
            let a = steering_vector(geom, theta)?;
            encode_input_into(snapshot, &a, sigma_v, &mut batch);
        }
        let acts = forward_batch(model, &batch)?;
        scores.extend_from_slice(acts.outputs());
        next += take;
    }
    Spectrum::new(grid.clone(), scores)
}
