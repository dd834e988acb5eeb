use num_complex::Complex64;

use super::{AcousticError, Result, TransducerArray};
use crate::geometry::Vec3;

/// Closest approach to an emitter at which the point-source model is evaluated.
pub const MIN_EMITTER_DISTANCE: f64 = 1e-3;

/// Far-field directivity of a baffled circular piston, `2 J₁(ka sinθ) / (ka sinθ)`.
pub fn piston_directivity(ka: f64, sin_theta: f64) -> f64 {
    let x = ka * sin_theta;
    if x.abs() < 1e-8 {
        1.0
    } else {
        2.0 * libm::j1(x) / x
    }
}

/// Complex pressure (Pa) at `point`:
/// `Σ A·D(θ)/d · exp(i(φ + k·d))` over all emitters.
pub fn complex_pressure(array: &TransducerArray, point: &Vec3) -> Result<Complex64> {
    let k = array.wavenumber();
    let ka = k * array.emitter_radius();
    let mut sum = Complex64::new(0.0, 0.0);
    for (index, t) in array.transducers().iter().enumerate() {
        let offset = point - t.position;
        let distance = offset.norm();
        if distance <= MIN_EMITTER_DISTANCE {
            return Err(AcousticError::Singularity { index, distance });
        }
        let cos_theta = (offset.dot(&t.normal) / distance).clamp(-1.0, 1.0);
        let sin_theta = (1.0 - cos_theta * cos_theta).sqrt();
        let magnitude = t.amplitude * piston_directivity(ka, sin_theta) / distance;
        sum += Complex64::from_polar(magnitude, t.phase + k * distance);
    }
    Ok(sum)
}
