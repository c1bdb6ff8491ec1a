use crate::num::Real;

use super::scene::Scene;
use super::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    /// Unit direction.
    pub direction: Vec3<T>,
}

impl<T: Real> Ray<T> {
    #[inline]
    pub fn new(origin: Vec3<T>, direction: Vec3<T>) -> Self {
        debug_assert!(direction.is_unit(), "ray direction must be unit length");
        Ray { origin, direction }
    }

    /// Ray from `from` toward `to`, with the distance between them.
    pub fn between(from: Vec3<T>, to: Vec3<T>) -> (Self, T) {
        let d = to - from;
        let len = d.norm();
        (
            Ray {
                origin: from,
                direction: d / len,
            },
            len,
        )
    }

    #[inline]
    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.direction * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit<T> {
    pub triangle_index: usize,
    pub distance: T,
    pub point: Vec3<T>,
    /// Unit surface normal facing the incoming ray.
    pub normal: Vec3<T>,
}

impl<T: Real> Scene<T> {
    /// Nearest surface hit farther than the self-intersection epsilon.
    /// Uses the acceleration structure when one has been built.
    pub fn intersect(&self, ray: &Ray<T>) -> Option<Hit<T>> {
        let found = match self.accel() {
            Some(bvh) => bvh.nearest(
                self.triangles(),
                ray.origin,
                ray.direction,
                T::ray_epsilon(),
            ),
            None => self.nearest_linear(ray),
        };
        found.map(|(ti, t)| {
            let n = self.triangles()[ti].normal();
            let normal = if n.dot(ray.direction) > T::zero() {
                -n
            } else {
                n
            };
            Hit {
                triangle_index: ti,
                distance: t,
                point: ray.at(t),
                normal,
            }
        })
    }

    /// Brute-force scan over every triangle.
    pub fn intersect_linear(&self, ray: &Ray<T>) -> Option<Hit<T>> {
        self.nearest_linear(ray).map(|(ti, t)| {
            let n = self.triangles()[ti].normal();
            let normal = if n.dot(ray.direction) > T::zero() {
                -n
            } else {
                n
            };
            Hit {
                triangle_index: ti,
                distance: t,
                point: ray.at(t),
                normal,
            }
        })
    }

    fn nearest_linear(&self, ray: &Ray<T>) -> Option<(usize, T)> {
        let eps = T::ray_epsilon();
        let mut best: Option<(usize, T)> = None;
        for (i, tri) in self.triangles().iter().enumerate() {
            if let Some(t) = tri.intersect(ray.origin, ray.direction) {
                if t > eps && best.map_or(true, |(_, bt)| t < bt) {
                    best = Some((i, t));
                }
            }
        }
        best
    }

    /// True when a surface lies strictly between `a` and `b`. Hits within a
    /// small tolerance of either endpoint are ignored so segments may start
    /// or end on a surface.
    pub fn segment_blocked(&self, a: Vec3<T>, b: Vec3<T>) -> bool {
        let (ray, len) = Ray::between(a, b);
        let tol = T::ray_epsilon() * T::lit(10.0);
        if !(len > tol) {
            return false;
        }
        match self.intersect(&ray) {
            Some(hit) => hit.distance < len - tol,
            None => false,
        }
    }
}
