//! Surface materials and the reverberation-time / absorption mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Scene, Vec3};
use crate::num::Real;

/// Sabine's constant 24 ln(10) / c at c = 343 m/s, in s/m.
pub const SABINE_CONSTANT: f64 = 0.161;

/// Largest uniform absorption a T60 target may map to.
pub const MAX_ABSORPTION: f64 = 0.99;

/// Octave-band centre frequencies for the multi-band mode, Hz.
pub const OCTAVE_CENTERS_HZ: [f64; 8] = [62.5, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0];

/// Per-band absorption and scattering coefficients, each in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material<T> {
    absorption: Vec<T>,
    scattering: Vec<T>,
}

impl<T: Real> Material<T> {
    pub fn new(absorption: Vec<T>, scattering: Vec<T>) -> Result<Self> {
        if absorption.is_empty() || absorption.len() != scattering.len() {
            return Err(Error::invalid(
                "material",
                "absorption and scattering need the same non-zero band count",
            ));
        }
        let unit = |v: &T| *v >= T::zero() && *v <= T::one();
        if !absorption.iter().all(unit) {
            return Err(Error::invalid(
                "absorption",
                "coefficients must lie in [0, 1]",
            ));
        }
        if !scattering.iter().all(unit) {
            return Err(Error::invalid(
                "scattering",
                "coefficients must lie in [0, 1]",
            ));
        }
        Ok(Material {
            absorption,
            scattering,
        })
    }

    /// Single-band material.
    pub fn broadband(absorption: T, scattering: T) -> Result<Self> {
        Self::new(vec![absorption], vec![scattering])
    }

    /// The same coefficients repeated over `n_bands` bands.
    pub fn uniform(absorption: T, scattering: T, n_bands: usize) -> Result<Self> {
        Self::new(vec![absorption; n_bands], vec![scattering; n_bands])
    }

    pub fn n_bands(&self) -> usize {
        self.absorption.len()
    }

    pub fn absorption(&self) -> &[T] {
        &self.absorption
    }

    pub fn scattering(&self) -> &[T] {
        &self.scattering
    }

    pub fn mean_absorption(&self) -> T {
        mean(&self.absorption)
    }

    pub fn mean_scattering(&self) -> T {
        mean(&self.scattering)
    }
}

fn mean<T: Real>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::lit(v.len() as f64)
}

/// Which closed-form reverberation formula maps a T60 target to absorption.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbsorptionModel {
    Sabine,
    #[default]
    Eyring,
}

fn room_volume_area<T: Real>(dims: Vec3<T>) -> Result<(T, T)> {
    if !(dims.x > T::zero() && dims.y > T::zero() && dims.z > T::zero()) {
        return Err(Error::invalid("dims", "all dimensions must be positive"));
    }
    let v = dims.product();
    let s = T::lit(2.0) * (dims.x * dims.y + dims.x * dims.z + dims.y * dims.z);
    Ok((v, s))
}

fn check_t60<T: Real>(t60: T) -> Result<()> {
    if t60 > T::zero() && t60.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "t60_target_s",
            format!("must be positive, got {t60}"),
        ))
    }
}

/// Uniform absorption realizing `target_t60` in a shoebox by Sabine's
/// equation `T60 = 0.161 V / (alpha S)`.
pub fn sabine_absorption<T: Real>(dims: Vec3<T>, target_t60: T) -> Result<T> {
    check_t60(target_t60)?;
    let (v, s) = room_volume_area(dims)?;
    let k = T::lit(SABINE_CONSTANT) * v / s;
    let alpha = k / target_t60;
    let max = T::lit(MAX_ABSORPTION);
    // Relative slack so the exact boundary T60 maps to 0.99 despite round-off.
    if alpha > max * (T::one() + T::epsilon() * T::lit(8.0)) {
        return Err(Error::UnreachableT60 {
            target_s: target_t60.as_f64(),
            min_s: (k / max).as_f64(),
        });
    }
    Ok(alpha.min(max))
}

/// Uniform absorption by Eyring's equation
/// `T60 = 0.161 V / (-S ln(1 - alpha))`.
pub fn eyring_absorption<T: Real>(dims: Vec3<T>, target_t60: T) -> Result<T> {
    check_t60(target_t60)?;
    let (v, s) = room_volume_area(dims)?;
    let k = T::lit(SABINE_CONSTANT) * v / s;
    let alpha = T::one() - (-k / target_t60).exp();
    let max = T::lit(MAX_ABSORPTION);
    if alpha > max * (T::one() + T::epsilon() * T::lit(8.0)) {
        return Err(Error::UnreachableT60 {
            target_s: target_t60.as_f64(),
            min_s: (k / -(T::one() - max).ln()).as_f64(),
        });
    }
    Ok(alpha.min(max))
}

/// Absorption for `target_t60` under the chosen formula.
pub fn absorption_for_t60<T: Real>(
    model: AbsorptionModel,
    dims: Vec3<T>,
    target_t60: T,
) -> Result<T> {
    match model {
        AbsorptionModel::Sabine => sabine_absorption(dims, target_t60),
        AbsorptionModel::Eyring => eyring_absorption(dims, target_t60),
    }
}

/// Shortest T60 reachable with absorption capped at 0.99.
pub fn min_achievable_t60<T: Real>(model: AbsorptionModel, dims: Vec3<T>) -> Result<T> {
    let (v, s) = room_volume_area(dims)?;
    let k = T::lit(SABINE_CONSTANT) * v / s;
    let max = T::lit(MAX_ABSORPTION);
    Ok(match model {
        AbsorptionModel::Sabine => k / max,
        AbsorptionModel::Eyring => k / -(T::one() - max).ln(),
    })
}

/// `sum(alpha_i * S_i)` over all triangles, using band-averaged absorption.
fn absorption_area<T: Real>(scene: &Scene<T>) -> T {
    scene
        .triangles()
        .iter()
        .map(|t| scene.materials()[t.material_id].mean_absorption() * t.area())
        .sum()
}

/// Sabine prediction `0.161 V / sum(alpha_i S_i)` for a closed scene.
pub fn predicted_t60<T: Real>(scene: &Scene<T>) -> Result<T> {
    let v = scene.volume()?;
    let a = absorption_area(scene);
    if !(a > T::zero()) {
        return Err(Error::InfiniteT60);
    }
    Ok(T::lit(SABINE_CONSTANT) * v / a)
}

/// Eyring prediction using the area-weighted mean absorption.
pub fn predicted_t60_eyring<T: Real>(scene: &Scene<T>) -> Result<T> {
    let v = scene.volume()?;
    let s = scene.total_area();
    let mean_alpha = absorption_area(scene) / s;
    if !(mean_alpha > T::zero()) {
        return Err(Error::InfiniteT60);
    }
    if mean_alpha >= T::one() {
        return Ok(T::zero());
    }
    Ok(T::lit(SABINE_CONSTANT) * v / (-s * (T::one() - mean_alpha).ln()))
}
