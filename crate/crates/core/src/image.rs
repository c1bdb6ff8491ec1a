//! Image-source engine.
//!
//! Shoebox rooms use the mirrored-lattice construction directly; any other
//! planar scene builds images by successive mirroring and validates each path
//! back to front, including occlusion by other surfaces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{EngineKind, ImpulseResponse, IrMetadata};
use crate::error::{Error, Result};
use crate::geometry::{Ray, Scene, Surface, Vec3};
use crate::num::Real;
use crate::SPEED_OF_SOUND;

/// Half-width of the fractional-delay kernel; the kernel has 81 taps.
pub const SINC_HALF_TAPS: i64 = 40;

/// Lattice coordinates of a shoebox image: per axis, position
/// `(1 - 2q) s + 2 n L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeIndex {
    pub n: [i64; 3],
    pub q: [u8; 3],
}

impl LatticeIndex {
    /// Reflections off the `min` and `max` wall of each axis.
    pub fn wall_hits(&self, axis: usize) -> (u64, u64) {
        let n = self.n[axis];
        let q = self.q[axis] as i64;
        ((n - q).unsigned_abs(), n.unsigned_abs())
    }

    pub fn order(&self) -> usize {
        (0..3)
            .map(|k| {
                let (a, b) = self.wall_hits(k);
                (a + b) as usize
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageSource<T> {
    pub position: Vec3<T>,
    pub order: usize,
    /// Product of per-bounce pressure factors `sqrt(1 - alpha)`.
    pub gain: T,
    /// Surfaces in reflection order, first bounce first (generic mode).
    pub generating_surfaces: Vec<usize>,
    /// Set for shoebox lattice images.
    pub lattice: Option<LatticeIndex>,
}

/// All shoebox lattice images of total order `<= max_order`, including the
/// source itself. `face_absorption` follows the shoebox face order
/// `[x=0, x=Lx, y=0, y=Ly, z=0, z=Lz]`.
pub fn enumerate_images_shoebox<T: Real>(
    dims: Vec3<T>,
    source: Vec3<T>,
    max_order: usize,
    face_absorption: [T; 6],
) -> Result<Vec<ImageSource<T>>> {
    if !(dims.x > T::zero() && dims.y > T::zero() && dims.z > T::zero()) {
        return Err(Error::invalid("dims", "all dimensions must be positive"));
    }
    if !(0..3).all(|k| source[k] > T::zero() && source[k] < dims[k]) {
        return Err(Error::invalid(
            "source",
            format!("{source:?} is not strictly inside the room"),
        ));
    }
    let refl: Vec<T> = face_absorption
        .iter()
        .map(|&a| (T::one() - a).max(T::zero()).sqrt())
        .collect();
    let m = max_order as i64;
    // Per axis: (coordinate, order, gain) for every (n, q) within budget.
    let per_axis: Vec<Vec<(T, usize, T, i64, u8)>> = (0..3)
        .map(|k| {
            let mut v = Vec::new();
            for n in -m..=m {
                for q in 0u8..2 {
                    let lo = (n - q as i64).unsigned_abs();
                    let hi = n.unsigned_abs();
                    let order = (lo + hi) as usize;
                    if order > max_order {
                        continue;
                    }
                    let sign = if q == 0 { T::one() } else { -T::one() };
                    let coord = sign * source[k] + T::lit(2.0 * n as f64) * dims[k];
                    let gain = refl[2 * k].powi(lo as i32) * refl[2 * k + 1].powi(hi as i32);
                    v.push((coord, order, gain, n, q));
                }
            }
            v
        })
        .collect();
    let mut out = Vec::new();
    for &(x, ox, gx, nx, qx) in &per_axis[0] {
        for &(y, oy, gy, ny, qy) in &per_axis[1] {
            if ox + oy > max_order {
                continue;
            }
            for &(z, oz, gz, nz, qz) in &per_axis[2] {
                let order = ox + oy + oz;
                if order > max_order {
                    continue;
                }
                out.push(ImageSource {
                    position: Vec3::new(x, y, z),
                    order,
                    gain: gx * gy * gz,
                    generating_surfaces: Vec::new(),
                    lattice: Some(LatticeIndex {
                        n: [nx, ny, nz],
                        q: [qx, qy, qz],
                    }),
                });
            }
        }
    }
    Ok(out)
}

/// Number of candidate images of order `1..=max_order` for `n_surfaces`
/// planes without immediate same-plane re-reflection:
/// `sum_k N (N - 1)^(k - 1)`.
pub fn image_count_closed_form(n_surfaces: usize, max_order: usize) -> u128 {
    let n = n_surfaces as u128;
    let mut total = 0u128;
    let mut level = n;
    for _ in 0..max_order {
        total = total.saturating_add(level);
        level = level.saturating_mul(n.saturating_sub(1));
    }
    total
}

/// Candidate images generated for `scene` before validation.
pub fn image_count<T: Real>(scene: &Scene<T>, max_order: usize) -> u128 {
    image_count_closed_form(scene.surfaces().len(), max_order)
}

/// Image construction and validation over a fixed scene.
pub struct ImageModel<'a, T> {
    scene: &'a Scene<T>,
    surfaces: Vec<Surface<T>>,
}

impl<'a, T: Real> ImageModel<'a, T> {
    pub fn new(scene: &'a Scene<T>) -> Self {
        ImageModel {
            scene,
            surfaces: scene.surfaces(),
        }
    }

    pub fn surfaces(&self) -> &[Surface<T>] {
        &self.surfaces
    }

    fn surface_reflection(&self, s: usize) -> T {
        let a = self.scene.materials()[self.surfaces[s].material_id].mean_absorption();
        (T::one() - a).max(T::zero()).sqrt()
    }

    /// Mirrors the source across surface sequences up to `max_order`, never
    /// reflecting twice in a row off the same surface. Candidates are
    /// returned in breadth-first order, the source first.
    pub fn enumerate(&self, source: Vec3<T>, max_order: usize) -> Vec<ImageSource<T>> {
        let mut out = vec![ImageSource {
            position: source,
            order: 0,
            gain: T::one(),
            generating_surfaces: Vec::new(),
            lattice: None,
        }];
        let mut frontier_start = 0;
        for order in 1..=max_order {
            let frontier_end = out.len();
            for parent in frontier_start..frontier_end {
                for s in 0..self.surfaces.len() {
                    let p = &out[parent];
                    if p.generating_surfaces.last() == Some(&s) {
                        continue;
                    }
                    let mut gs = p.generating_surfaces.clone();
                    gs.push(s);
                    let img = ImageSource {
                        position: self.surfaces[s].mirror(p.position),
                        order,
                        gain: p.gain * self.surface_reflection(s),
                        generating_surfaces: gs,
                        lattice: None,
                    };
                    out.push(img);
                }
            }
            frontier_start = frontier_end;
        }
        out
    }

    /// Reflection points from source to listener if the image path is
    /// realizable: every leg crosses its generating surface inside the
    /// surface's extent, and no leg is blocked by any other surface.
    pub fn validate(&self, image: &ImageSource<T>, listener: Vec3<T>) -> Option<Vec<Vec3<T>>> {
        match image.lattice {
            Some(l) if image.generating_surfaces.is_empty() => {
                self.validate_lattice(image.position, l, listener)
            }
            _ => self.validate_generic(image, listener),
        }
    }

    fn validate_generic(&self, image: &ImageSource<T>, listener: Vec3<T>) -> Option<Vec<Vec3<T>>> {
        let mut points = Vec::with_capacity(image.order);
        let mut from = listener;
        let mut target = image.position;
        for &s in image.generating_surfaces.iter().rev() {
            let surf = &self.surfaces[s];
            // The leg must approach the reflecting side of the surface.
            if !(surf.signed_distance(from) > T::zero() && surf.signed_distance(target) < T::zero())
            {
                return None;
            }
            let (ray, len) = Ray::between(from, target);
            let t = surf.triangles.iter().find_map(|&ti| {
                self.scene.triangles()[ti]
                    .intersect(ray.origin, ray.direction)
                    .filter(|&t| t > T::zero() && t < len)
            })?;
            let p = ray.at(t);
            points.push(p);
            from = p;
            target = surf.mirror(target);
        }
        // `target` is now the original source.
        let source = target;
        let mut path = Vec::with_capacity(points.len() + 2);
        path.push(listener);
        path.extend(points.iter().copied());
        path.push(source);
        if path
            .windows(2)
            .any(|w| self.scene.segment_blocked(w[0], w[1]))
        {
            return None;
        }
        points.reverse();
        Some(points)
    }

    fn validate_lattice(
        &self,
        image: Vec3<T>,
        lattice: LatticeIndex,
        listener: Vec3<T>,
    ) -> Option<Vec<Vec3<T>>> {
        let dims = self.scene.shoebox_info()?.dims;
        let delta = image - listener;
        let mut crossings: Vec<T> = Vec::with_capacity(lattice.order());
        for k in 0..3 {
            let (lo, hi) = (listener[k], image[k]);
            if lo == hi {
                continue;
            }
            let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
            let l = dims[k];
            let mut m = (a / l).floor() + T::one();
            while m * l < b {
                crossings.push((m * l - listener[k]) / delta[k]);
                m = m + T::one();
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let fold = |p: Vec3<T>| {
            let mut q = p;
            for k in 0..3 {
                let period = T::lit(2.0) * dims[k];
                let mut x = p[k] % period;
                if x < T::zero() {
                    x = x + period;
                }
                if x > dims[k] {
                    x = period - x;
                }
                q = q.with(k, x);
            }
            q
        };
        let mut points: Vec<Vec3<T>> = crossings
            .iter()
            .map(|&t| fold(listener + delta * t))
            .collect();
        let source = fold(image);
        let mut path = Vec::with_capacity(points.len() + 2);
        path.push(listener);
        path.extend(points.iter().copied());
        path.push(source);
        if path
            .windows(2)
            .any(|w| self.scene.segment_blocked(w[0], w[1]))
        {
            return None;
        }
        points.reverse();
        Some(points)
    }
}

/// Checks one image path; see [`ImageModel::validate`].
pub fn validate_image_path<T: Real>(
    scene: &Scene<T>,
    image: &ImageSource<T>,
    listener: Vec3<T>,
) -> Option<Vec<Vec3<T>>> {
    ImageModel::new(scene).validate(image, listener)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// 81-tap Hann-windowed sinc fractional delay.
    #[default]
    Sinc,
    /// Round each arrival to the nearest sample.
    Nearest,
}

/// Adds an arrival of amplitude `amp` at fractional sample `delay`.
fn place_arrival<T: Real>(
    h: &mut [T],
    delay: T,
    amp: T,
    interp: Interpolation,
    kernel: &SincTables<T>,
) {
    let len = h.len() as i64;
    match interp {
        Interpolation::Nearest => {
            let i = delay.round().to_i64().unwrap_or(i64::MAX);
            if (0..len).contains(&i) {
                h[i as usize] = h[i as usize] + amp;
            }
        }
        Interpolation::Sinc => {
            let center = delay.round().to_i64().unwrap_or(i64::MAX);
            if center - SINC_HALF_TAPS >= len || center + SINC_HALF_TAPS < 0 {
                return;
            }
            // x_j = j - f with f = delay - center; sin(pi x_j) = -(-1)^j sin(pi f).
            let f = delay - T::lit(center as f64);
            let sin_pf = (T::PI() * f).sin();
            let b = kernel.omega * f;
            let (sb, cb) = (b.sin(), b.cos());
            for (ji, j) in (-SINC_HALF_TAPS..=SINC_HALF_TAPS).enumerate() {
                let idx = center + j;
                if idx < 0 || idx >= len {
                    continue;
                }
                let x = T::lit(j as f64) - f;
                let sinc = if x == T::zero() {
                    T::one()
                } else {
                    let sign = if j % 2 == 0 { -T::one() } else { T::one() };
                    sign * sin_pf / (T::PI() * x)
                };
                // Hann window over 81 taps: 0.5 (1 + cos(2 pi x / 81)).
                let cos_wx = kernel.cos[ji] * cb + kernel.sin[ji] * sb;
                let w = T::lit(0.5) * (T::one() + cos_wx);
                let i = idx as usize;
                h[i] = h[i] + amp * w * sinc;
            }
        }
    }
}

struct SincTables<T> {
    omega: T,
    cos: Vec<T>,
    sin: Vec<T>,
}

impl<T: Real> SincTables<T> {
    fn new() -> Self {
        let omega = T::TAU() / T::lit((2 * SINC_HALF_TAPS + 1) as f64);
        let js = -SINC_HALF_TAPS..=SINC_HALF_TAPS;
        SincTables {
            omega,
            cos: js
                .clone()
                .map(|j| (omega * T::lit(j as f64)).cos())
                .collect(),
            sin: js.map(|j| (omega * T::lit(j as f64)).sin()).collect(),
        }
    }
}

/// Rendering options for [`render_ir_image`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageParams {
    pub max_order: usize,
    pub fs: u32,
    pub ir_length_s: f64,
    #[serde(default)]
    pub interpolation: Interpolation,
}

/// Image-method impulse response at every receiver. Each arrival has
/// amplitude `gain / (4 pi d)` at delay `d / c`.
pub fn render_ir_image<T: Real>(
    scene: &Scene<T>,
    source: Vec3<T>,
    receivers: &[Vec3<T>],
    params: &ImageParams,
) -> Result<ImpulseResponse<T>> {
    if params.fs == 0 {
        return Err(Error::invalid("fs", "sample rate must be positive"));
    }
    if !(params.ir_length_s > 0.0) {
        return Err(Error::invalid("ir_length_s", "must be positive"));
    }
    if receivers.is_empty() {
        return Err(Error::invalid(
            "receivers",
            "at least one receiver is required",
        ));
    }
    if !scene.contains(source) {
        return Err(Error::invalid(
            "source",
            format!("{source:?} is not inside the scene"),
        ));
    }
    if let Some(r) = receivers.iter().find(|r| !scene.contains(**r)) {
        return Err(Error::invalid(
            "receivers",
            format!("{r:?} is not inside the scene"),
        ));
    }
    let c = T::lit(SPEED_OF_SOUND);
    for r in receivers {
        let delay = (r.distance(source) / c).as_f64();
        if delay > params.ir_length_s {
            return Err(Error::IrTooShort {
                ir_length_s: params.ir_length_s,
                delay_s: delay,
            });
        }
    }
    let model = ImageModel::new(scene);
    let (images, needs_validation) = match scene.shoebox_info() {
        Some(sb) => {
            let alpha: [T; 6] =
                std::array::from_fn(|f| scene.materials()[sb.face_materials[f]].mean_absorption());
            (
                enumerate_images_shoebox(sb.dims, source, params.max_order, alpha)?,
                !scene.obstacles().is_empty(),
            )
        }
        None => (model.enumerate(source, params.max_order), true),
    };
    let n = (params.ir_length_s * params.fs as f64).ceil() as usize;
    let fs = T::lit(params.fs as f64);
    let four_pi = T::lit(4.0) * T::PI();
    let kernel = SincTables::new();
    let max_delay = T::lit(n as f64 + SINC_HALF_TAPS as f64);
    let channels: Vec<Vec<T>> = receivers
        .par_iter()
        .map(|&r| {
            let mut h = vec![T::zero(); n];
            // Fixed image order keeps the summation bit-reproducible.
            for img in &images {
                if !(img.gain > T::zero()) {
                    continue;
                }
                let d = img.position.distance(r);
                let delay = d / c * fs;
                if delay > max_delay {
                    continue;
                }
                if needs_validation && model.validate(img, r).is_none() {
                    continue;
                }
                place_arrival(
                    &mut h,
                    delay,
                    img.gain / (four_pi * d),
                    params.interpolation,
                    &kernel,
                );
            }
            h
        })
        .collect();
    let metadata = IrMetadata {
        engine: Some(EngineKind::Image),
        seed: None,
        source: Some(source.cast()),
        receivers: receivers.iter().map(|r| r.cast()).collect(),
        room_dims: scene.shoebox_info().map(|s| s.dims.cast()),
        t60_target_s: None,
    };
    Ok(ImpulseResponse::new(channels, params.fs)?.with_metadata(metadata))
}
