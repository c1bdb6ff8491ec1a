use crate::error::{Error, Result};
use crate::materials::Material;
use crate::num::Real;

use super::bvh::Bvh;
use super::Vec3;

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Self {
        Aabb { min, max }
    }

    pub fn empty() -> Self {
        Aabb {
            min: Vec3::splat(T::infinity()),
            max: Vec3::splat(T::neg_infinity()),
        }
    }

    pub fn grow(&mut self, p: Vec3<T>) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn union(self, o: Self) -> Self {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn extent(&self) -> Vec3<T> {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn volume(&self) -> T {
        self.extent().product()
    }

    /// Strict interior test.
    pub fn contains_strict(&self, p: Vec3<T>) -> bool {
        (0..3).all(|k| p[k] > self.min[k] && p[k] < self.max[k])
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn padded(self, pad: T) -> Self {
        Aabb {
            min: self.min - Vec3::splat(pad),
            max: self.max + Vec3::splat(pad),
        }
    }

    /// Slab test; returns the parametric entry distance if the ray overlaps
    /// the box within `[0, t_max]`.
    #[inline]
    pub fn ray_entry(&self, origin: Vec3<T>, inv_dir: Vec3<T>, t_max: T) -> Option<T> {
        let mut t0 = T::zero();
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.min[k] - origin[k]) * inv_dir[k];
            let b = (self.max[k] - origin[k]) * inv_dir[k];
            // NaN (0 * inf) leaves the interval unconstrained on that axis.
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0 <= t1).then_some(t0)
    }
}

/// A planar triangle with a material reference.
///
/// The winding determines the normal: `(b - a) x (c - a)`. Boundary
/// triangles are wound so the normal points into the air volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Triangle<T> {
    pub vertices: [Vec3<T>; 3],
    pub material_id: usize,
    normal: Vec3<T>,
    area: T,
}

impl<T: Real> Triangle<T> {
    pub fn new(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>, material_id: usize) -> Result<Self> {
        let n = (b - a).cross(c - a);
        let area = n.norm() * T::lit(0.5);
        if !(area > T::lit(1e-12)) {
            return Err(Error::DegenerateGeometry(format!(
                "triangle area {} m^2 is below 1e-12",
                area
            )));
        }
        Ok(Triangle {
            vertices: [a, b, c],
            material_id,
            normal: n.normalized(),
            area,
        })
    }

    #[inline]
    pub fn normal(&self) -> Vec3<T> {
        self.normal
    }

    #[inline]
    pub fn area(&self) -> T {
        self.area
    }

    pub fn centroid(&self) -> Vec3<T> {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]) / T::lit(3.0)
    }

    pub fn bounds(&self) -> Aabb<T> {
        let mut b = Aabb::empty();
        for v in self.vertices {
            b.grow(v);
        }
        b
    }

    /// Two-sided Moller-Trumbore test. Returns the ray parameter of the hit.
    #[inline]
    pub fn intersect(&self, origin: Vec3<T>, dir: Vec3<T>) -> Option<T> {
        let [a, b, c] = self.vertices;
        let e1 = b - a;
        let e2 = c - a;
        let p = dir.cross(e2);
        let det = e1.dot(p);
        if det.abs() < T::epsilon() * e1.norm_squared().max(e2.norm_squared()) {
            return None;
        }
        let inv = T::one() / det;
        let s = origin - a;
        let u = s.dot(p) * inv;
        // Slack on the barycentric bounds closes cracks along shared edges.
        let slack = T::epsilon() * T::lit(16.0);
        if u < -slack || u > T::one() + slack {
            return None;
        }
        let q = s.cross(e1);
        let v = dir.dot(q) * inv;
        if v < -slack || u + v > T::one() + slack {
            return None;
        }
        Some(e2.dot(q) * inv)
    }
}

/// Face order used for shoebox rooms: `2 * axis + side`, i.e.
/// `[x = 0, x = Lx, y = 0, y = Ly, z = 0, z = Lz]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shoebox<T> {
    pub dims: Vec3<T>,
    pub face_materials: [usize; 6],
}

/// A maximal set of coplanar, equally oriented triangles sharing a material.
#[derive(Clone, Debug)]
pub struct Surface<T> {
    pub normal: Vec3<T>,
    /// Plane offset: `normal . x = offset` for points on the surface.
    pub offset: T,
    pub material_id: usize,
    pub triangles: Vec<usize>,
}

impl<T: Real> Surface<T> {
    /// Mirror image of `p` across the surface plane.
    pub fn mirror(&self, p: Vec3<T>) -> Vec3<T> {
        let d = self.normal.dot(p) - self.offset;
        p - self.normal * (T::lit(2.0) * d)
    }

    /// Signed distance of `p` from the plane, positive on the normal side.
    pub fn signed_distance(&self, p: Vec3<T>) -> T {
        self.normal.dot(p) - self.offset
    }
}

/// Triangle-mesh acoustic scene. Immutable once built; share it freely.
#[derive(Clone, Debug)]
pub struct Scene<T> {
    triangles: Vec<Triangle<T>>,
    materials: Vec<Material<T>>,
    bounds: Aabb<T>,
    obstacles: Vec<Aabb<T>>,
    shoebox: Option<Shoebox<T>>,
    accel: Option<Bvh<T>>,
}

fn box_faces<T: Real>(b: &Aabb<T>, inward: bool, material_id: usize) -> Result<Vec<Triangle<T>>> {
    let mut out = Vec::with_capacity(12);
    for axis in 0..3 {
        let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let coord = if side == 0 { b.min[axis] } else { b.max[axis] };
            let corner = |cu: T, cw: T| Vec3::zero().with(axis, coord).with(u, cu).with(w, cw);
            let q = [
                corner(b.min[u], b.min[w]),
                corner(b.max[u], b.min[w]),
                corner(b.max[u], b.max[w]),
                corner(b.min[u], b.max[w]),
            ];
            // Room walls face the interior; obstacle faces face away from the box.
            let toward_max = (side == 0) == inward;
            let want = if toward_max { T::one() } else { -T::one() };
            let mut t1 = Triangle::new(q[0], q[1], q[2], material_id)?;
            let mut t2 = Triangle::new(q[0], q[2], q[3], material_id)?;
            if t1.normal()[axis] * want < T::zero() {
                t1 = Triangle::new(q[0], q[2], q[1], material_id)?;
                t2 = Triangle::new(q[0], q[3], q[2], material_id)?;
            }
            out.push(t1);
            out.push(t2);
        }
    }
    Ok(out)
}

impl<T: Real> Scene<T> {
    /// Builds a scene from explicit triangles. Every `material_id` must
    /// index into `materials`.
    pub fn new(triangles: Vec<Triangle<T>>, materials: Vec<Material<T>>) -> Result<Self> {
        if let Some(t) = triangles.iter().find(|t| t.material_id >= materials.len()) {
            return Err(Error::invalid(
                "material_id",
                format!(
                    "{} exceeds material table of size {}",
                    t.material_id,
                    materials.len()
                ),
            ));
        }
        check_band_counts(&materials)?;
        let mut bounds = Aabb::empty();
        for t in &triangles {
            bounds = bounds.union(t.bounds());
        }
        Ok(Scene {
            triangles,
            materials,
            bounds,
            obstacles: Vec::new(),
            shoebox: None,
            accel: None,
        })
    }

    /// Closed box `[0,Lx] x [0,Ly] x [0,Lz]` with all faces using `material`.
    pub fn shoebox(dims: Vec3<T>, material: Material<T>) -> Result<Self> {
        Self::shoebox_with_materials(dims, vec![material], [0; 6])
    }

    /// Shoebox with one material per face, in [`Shoebox`] face order.
    pub fn shoebox_with_materials(
        dims: Vec3<T>,
        materials: Vec<Material<T>>,
        face_materials: [usize; 6],
    ) -> Result<Self> {
        if !(dims.x > T::zero() && dims.y > T::zero() && dims.z > T::zero()) || !dims.is_finite() {
            return Err(Error::invalid(
                "dims",
                format!("all dimensions must be positive, got {dims:?}"),
            ));
        }
        if let Some(&m) = face_materials.iter().find(|&&m| m >= materials.len()) {
            return Err(Error::invalid(
                "material_id",
                format!("{m} exceeds material table of size {}", materials.len()),
            ));
        }
        check_band_counts(&materials)?;
        let bounds = Aabb::new(Vec3::zero(), dims);
        let mut triangles = box_faces(&bounds, true, 0)?;
        for (i, t) in triangles.iter_mut().enumerate() {
            t.material_id = face_materials[i / 2];
        }
        Ok(Scene {
            triangles,
            materials,
            bounds,
            obstacles: Vec::new(),
            shoebox: Some(Shoebox {
                dims,
                face_materials,
            }),
            accel: None,
        })
    }

    /// Appends an axis-aligned obstacle box tessellated into 12 triangles.
    pub fn add_obstacle(&mut self, obstacle: Aabb<T>, material_id: usize) -> Result<()> {
        if material_id >= self.materials.len() {
            return Err(Error::invalid(
                "material_id",
                format!(
                    "{material_id} exceeds material table of size {}",
                    self.materials.len()
                ),
            ));
        }
        let e = obstacle.extent();
        if !(e.x > T::zero() && e.y > T::zero() && e.z > T::zero()) {
            return Err(Error::invalid(
                "obstacle",
                "obstacle box must have positive extent",
            ));
        }
        self.triangles
            .extend(box_faces(&obstacle, false, material_id)?);
        self.bounds = self.bounds.union(obstacle);
        self.obstacles.push(obstacle);
        self.accel = None;
        Ok(())
    }

    pub fn with_obstacle(mut self, obstacle: Aabb<T>, material_id: usize) -> Result<Self> {
        self.add_obstacle(obstacle, material_id)?;
        Ok(self)
    }

    /// Adds a material and returns its id.
    pub fn add_material(&mut self, material: Material<T>) -> Result<usize> {
        if let Some(first) = self.materials.first() {
            if first.n_bands() != material.n_bands() {
                return Err(Error::invalid(
                    "material",
                    "all materials must share one band count",
                ));
            }
        }
        self.materials.push(material);
        Ok(self.materials.len() - 1)
    }

    /// Replaces every material's coefficients, keeping ids stable.
    pub fn set_material(&mut self, id: usize, material: Material<T>) -> Result<()> {
        if id >= self.materials.len() {
            return Err(Error::invalid("material_id", format!("{id} out of range")));
        }
        self.materials[id] = material;
        check_band_counts(&self.materials)
    }

    /// Builds the bounding-volume hierarchy used by [`Scene::intersect`].
    pub fn build_accel(&mut self) {
        self.accel = Some(Bvh::build(&self.triangles));
    }

    pub fn with_accel(mut self) -> Self {
        self.build_accel();
        self
    }

    pub fn drop_accel(&mut self) {
        self.accel = None;
    }

    pub(crate) fn accel(&self) -> Option<&Bvh<T>> {
        self.accel.as_ref()
    }

    pub fn triangles(&self) -> &[Triangle<T>] {
        &self.triangles
    }

    pub fn materials(&self) -> &[Material<T>] {
        &self.materials
    }

    pub fn material_of(&self, triangle_index: usize) -> &Material<T> {
        &self.materials[self.triangles[triangle_index].material_id]
    }

    pub fn n_bands(&self) -> usize {
        self.materials.first().map_or(1, Material::n_bands)
    }

    pub fn bounds(&self) -> Aabb<T> {
        self.bounds
    }

    pub fn obstacles(&self) -> &[Aabb<T>] {
        &self.obstacles
    }

    pub fn shoebox_info(&self) -> Option<&Shoebox<T>> {
        self.shoebox.as_ref()
    }

    /// True when `p` is strictly inside the scene bounds and outside every
    /// obstacle.
    pub fn contains(&self, p: Vec3<T>) -> bool {
        self.bounds.contains_strict(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }

    pub fn total_area(&self) -> T {
        self.triangles.iter().map(Triangle::area).sum()
    }

    /// Air volume enclosed by the mesh (divergence theorem). Requires a
    /// closed mesh whose normals point into the air.
    pub fn volume(&self) -> Result<T> {
        let six_v: T = self
            .triangles
            .iter()
            .map(|t| t.vertices[0].dot(t.vertices[1].cross(t.vertices[2])))
            .sum();
        let v = -six_v / T::lit(6.0);
        if v > T::zero() {
            Ok(v)
        } else {
            Err(Error::NotClosed)
        }
    }

    /// Groups triangles into planar reflecting surfaces.
    pub fn surfaces(&self) -> Vec<Surface<T>> {
        let mut out: Vec<Surface<T>> = Vec::new();
        let tol = T::lit(1e-9);
        for (i, t) in self.triangles.iter().enumerate() {
            let n = t.normal();
            let off = n.dot(t.vertices[0]);
            let scale = T::one().max(off.abs());
            match out.iter_mut().find(|s| {
                s.material_id == t.material_id
                    && (s.normal - n).norm() <= tol
                    && (s.offset - off).abs() <= tol * scale
            }) {
                Some(s) => s.triangles.push(i),
                None => out.push(Surface {
                    normal: n,
                    offset: off,
                    material_id: t.material_id,
                    triangles: vec![i],
                }),
            }
        }
        out
    }
}

fn check_band_counts<T: Real>(materials: &[Material<T>]) -> Result<()> {
    if let Some(first) = materials.first() {
        if materials.iter().any(|m| m.n_bands() != first.n_bands()) {
            return Err(Error::invalid(
                "material",
                "all materials must share one band count",
            ));
        }
    }
    Ok(())
}

/// Closed axis-aligned box room with every face assigned `material`.
pub fn make_shoebox<T: Real>(dims: Vec3<T>, material: Material<T>) -> Result<Scene<T>> {
    Scene::shoebox(dims, material)
}
