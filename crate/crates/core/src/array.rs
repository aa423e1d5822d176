//! Linear-array geometry and steering vectors.
//!
//! Angles cross every public interface in degrees and are measured from the
//! array axis, so boresight is 90 degrees. Positions are stored in units of
//! the wavelength with the reference point at the array center.

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Snapshot / steering-vector storage. Entries must stay finite.
pub type ComplexVector = Vec<Complex64>;

/// Element positions of a linear array, in wavelength units, centered on the
/// array's reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<f64>,
}

impl ArrayGeometry {
    /// Arbitrary linear array from explicit element positions (wavelength
    /// units). Positions are re-centered so their mean is zero.
    pub fn from_positions(mut positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(invalid("array needs at least one element"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(invalid("element positions must be finite"));
        }
        let mean = positions.iter().sum::<f64>() / positions.len() as f64;
        for p in &mut positions {
            *p -= mean;
        }
        Ok(ArrayGeometry { positions })
    }

    pub fn num_elements(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
}

/// Uniform linear array with half-wavelength spacing, centered at the origin.
pub fn make_ula(num_elements: usize) -> Result<ArrayGeometry> {
    if num_elements == 0 {
        return Err(invalid("ULA needs at least one element"));
    }
    let half_span = (num_elements - 1) as f64 / 2.0;
    let positions = (0..num_elements)
        .map(|m| 0.5 * (m as f64 - half_span))
        .collect();
    Ok(ArrayGeometry { positions })
}

/// Array response to a unit far-field source at `theta_deg`, normalized to
/// unit Euclidean norm: entry m is `exp(j*2*pi*p_m*cos(theta)) / sqrt(M)`.
pub fn steering_vector(geom: &ArrayGeometry, theta_deg: f64) -> Result<ComplexVector> {
    if !theta_deg.is_finite() {
        return Err(invalid(format!("angle must be finite, got {theta_deg}")));
    }
    let m = geom.num_elements();
    let scale = 1.0 / (m as f64).sqrt();
    let cos_theta = theta_deg.to_radians().cos();
    let k = 2.0 * std::f64::consts::PI * cos_theta;
    Ok(geom
        .positions
        .iter()
        .map(|&p| {
            let (sin, cos) = (k * p).sin_cos();
            Complex64::new(scale * cos, scale * sin)
        })
        .collect())
}

/// Hermitian inner product `a^H b`.
pub fn inner_product(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub(crate) fn ensure_finite(v: &[Complex64], what: &str) -> Result<()> {
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(crate::error::Error::NonFinite(format!(
            "{what} contains a NaN or infinite entry"
        )));
    }
    Ok(())
}
