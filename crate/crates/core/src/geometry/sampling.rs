//! Reflection directions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::num::Real;

use super::Vec3;

/// Mirror-law reflection of `incoming` about `normal`.
pub fn reflect_specular<T: Real>(incoming: Vec3<T>, normal: Vec3<T>) -> Result<Vec3<T>> {
    let c = incoming.dot(normal);
    if !(c < T::zero()) {
        return Err(Error::invalid(
            "incoming",
            "direction does not face the surface (dot(incoming, normal) >= 0)",
        ));
    }
    Ok(reflect_unchecked(incoming, normal))
}

#[inline]
pub(crate) fn reflect_unchecked<T: Real>(incoming: Vec3<T>, normal: Vec3<T>) -> Vec3<T> {
    let c = incoming.dot(normal);
    // Renormalize to stop drift over hundreds of bounces.
    (incoming - normal * (T::lit(2.0) * c)).normalized()
}

/// Cosine-weighted direction in the hemisphere around `normal`
/// (pdf = cos(theta) / pi).
pub fn sample_lambert<T: Real, R: Rng + ?Sized>(normal: Vec3<T>, rng: &mut R) -> Vec3<T> {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let r = u1.sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    // 1 - u1 lies in (0, 1], so the z component is never zero.
    let z = (1.0 - u1).sqrt();
    let (t, b) = normal.orthonormal_basis();
    let d = t * T::lit(r * phi.cos()) + b * T::lit(r * phi.sin()) + normal * T::lit(z);
    d.normalized()
}

/// Direction distributed uniformly over the unit sphere.
pub fn sample_uniform_sphere<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Vec3<T> {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let z = 1.0 - 2.0 * u1;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    Vec3::from_f64(r * phi.cos(), r * phi.sin(), z).normalized()
}
