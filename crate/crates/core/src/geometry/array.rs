use crate::num::Real;

use super::Vec3;

/// Uniform circular microphone array.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircularArray<T> {
    pub center: Vec3<T>,
    pub radius: T,
    pub n_mics: usize,
    /// Unit normal of the array plane.
    pub axis: Vec3<T>,
    /// Rotation of mic 0 away from the reference direction, radians.
    pub phase: T,
}

impl<T: Real> CircularArray<T> {
    /// Reference direction in the array plane: the projection of +x, or +y
    /// when the axis is parallel to x.
    pub fn reference_direction(&self) -> Vec3<T> {
        let axis = self.axis.normalized();
        let mut r = Vec3::new(T::one(), T::zero(), T::zero());
        let mut p = r - axis * axis.dot(r);
        if p.norm() < T::lit(1e-6) {
            r = Vec3::new(T::zero(), T::one(), T::zero());
            p = r - axis * axis.dot(r);
        }
        p.normalized()
    }

    pub fn positions(&self) -> Vec<Vec3<T>> {
        let axis = self.axis.normalized();
        let u = self.reference_direction();
        let v = axis.cross(u);
        (0..self.n_mics)
            .map(|k| {
                let a = self.phase + T::TAU() * T::lit(k as f64) / T::lit(self.n_mics as f64);
                self.center + (u * a.cos() + v * a.sin()) * self.radius
            })
            .collect()
    }
}

/// `n_mics` points equally spaced on a circle about `center`, mic 0 along
/// the reference direction.
pub fn circular_array<T: Real>(
    center: Vec3<T>,
    radius: T,
    n_mics: usize,
    axis: Vec3<T>,
) -> Vec<Vec3<T>> {
    CircularArray {
        center,
        radius,
        n_mics,
        axis,
        phase: T::zero(),
    }
    .positions()
}
