//! Randomized far-field room configurations.
//!
//! Rooms span 3 x 3 x 2.5 m to 8 x 10 x 6 m, T60 targets 0.05 to 0.5 s,
//! source and microphones keep 0.3 m from every wall, and the source sits
//! 0.5 to 6 m from the centre of a 6-microphone, 7 cm diameter circular
//! array.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CircularArray;
use crate::materials::{min_achievable_t60, AbsorptionModel};
use crate::rng::{domain, substream, StreamRng};
use crate::Vec3;

pub const DIMS_MIN_M: [f64; 3] = [3.0, 3.0, 2.5];
pub const DIMS_MAX_M: [f64; 3] = [8.0, 10.0, 6.0];
pub const T60_RANGE_S: [f64; 2] = [0.05, 0.5];
pub const WALL_MARGIN_M: f64 = 0.3;
pub const DISTANCE_RANGE_M: [f64; 2] = [0.5, 6.0];
pub const ARRAY_RADIUS_M: f64 = 0.035;
pub const N_MICS: usize = 6;
pub const DEFAULT_SCATTERING: f64 = 0.5;
pub const MAX_ATTEMPTS: usize = 10_000;

/// One far-field scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub room_dims_m: Vec3,
    pub t60_target_s: f64,
    #[serde(default = "default_scattering")]
    pub scattering: f64,
    pub source_m: Vec3,
    pub array_center_m: Vec3,
    #[serde(default = "default_axis")]
    pub array_axis: Vec3,
    #[serde(default)]
    pub array_rotation_rad: f64,
    pub mics_m: Vec<Vec3>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub index: u64,
}

fn default_scattering() -> f64 {
    DEFAULT_SCATTERING
}

fn default_axis() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

impl RoomConfig {
    /// Builds a config around an explicit array pose; mics are placed on the
    /// standard 6-mic, 3.5 cm radius circle.
    pub fn new(
        room_dims_m: Vec3,
        t60_target_s: f64,
        source_m: Vec3,
        array_center_m: Vec3,
        array_rotation_rad: f64,
    ) -> Self {
        let axis = default_axis();
        RoomConfig {
            room_dims_m,
            t60_target_s,
            scattering: DEFAULT_SCATTERING,
            source_m,
            array_center_m,
            array_axis: axis,
            array_rotation_rad,
            mics_m: standard_array(array_center_m, axis, array_rotation_rad),
            seed: 0,
            index: 0,
        }
    }

    pub fn source_array_distance(&self) -> f64 {
        self.source_m.distance(self.array_center_m)
    }

    /// Geometric validity required by the engines: positive dimensions,
    /// every point strictly inside the room, coefficients in range.
    pub fn validate(&self) -> Result<()> {
        let d = self.room_dims_m;
        if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0 && d.is_finite()) {
            return Err(Error::invalid(
                "room_dims_m",
                "all dimensions must be positive",
            ));
        }
        if !(self.t60_target_s > 0.0 && self.t60_target_s.is_finite()) {
            return Err(Error::invalid("t60_target_s", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.scattering) {
            return Err(Error::invalid("scattering", "must lie in [0, 1]"));
        }
        let inside = |p: Vec3| (0..3).all(|k| p[k] > 0.0 && p[k] < d[k]);
        if !inside(self.source_m) {
            return Err(Error::invalid(
                "source_m",
                "must lie strictly inside the room",
            ));
        }
        if self.mics_m.is_empty() {
            return Err(Error::invalid(
                "mics_m",
                "at least one microphone is required",
            ));
        }
        if !self.mics_m.iter().all(|&m| inside(m)) {
            return Err(Error::invalid(
                "mics_m",
                "every microphone must lie strictly inside the room",
            ));
        }
        Ok(())
    }

    /// Every way this config departs from the sampling protocol; empty when
    /// it conforms.
    pub fn protocol_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let tol = 1e-9;
        for k in 0..3 {
            let x = self.room_dims_m[k];
            if x < DIMS_MIN_M[k] - tol || x > DIMS_MAX_M[k] + tol {
                v.push(format!(
                    "room dimension {k} = {x} outside [{}, {}]",
                    DIMS_MIN_M[k], DIMS_MAX_M[k]
                ));
            }
        }
        if self.t60_target_s < T60_RANGE_S[0] - tol || self.t60_target_s > T60_RANGE_S[1] + tol {
            v.push(format!("t60 {} outside range", self.t60_target_s));
        }
        let margin = |p: Vec3| {
            (0..3)
                .map(|k| p[k].min(self.room_dims_m[k] - p[k]))
                .fold(f64::INFINITY, f64::min)
        };
        if margin(self.source_m) < WALL_MARGIN_M - tol {
            v.push("source closer than 0.3 m to a wall".into());
        }
        for (i, &m) in self.mics_m.iter().enumerate() {
            if margin(m) < WALL_MARGIN_M - tol {
                v.push(format!("mic {i} closer than 0.3 m to a wall"));
            }
        }
        let dist = self.source_array_distance();
        if dist < DISTANCE_RANGE_M[0] - tol || dist > DISTANCE_RANGE_M[1] + tol {
            v.push(format!("source-array distance {dist} outside range"));
        }
        let expect = CircularArray {
            center: self.array_center_m,
            radius: ARRAY_RADIUS_M,
            n_mics: N_MICS,
            axis: self.array_axis,
            phase: self.array_rotation_rad,
        }
        .positions();
        if self.mics_m.len() != N_MICS
            || self
                .mics_m
                .iter()
                .zip(&expect)
                .any(|(a, b)| a.distance(*b) > 1e-9)
        {
            v.push("mics are not the 6-mic 3.5 cm circular array about the centre".into());
        }
        v
    }
}

fn standard_array(center: Vec3, axis: Vec3, phase: f64) -> Vec<Vec3> {
    CircularArray {
        center,
        radius: ARRAY_RADIUS_M,
        n_mics: N_MICS,
        axis,
        phase,
    }
    .positions()
}

/// Knobs a caller may override; defaults reproduce the protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub scattering: f64,
    /// Formula used to decide whether a T60 target is reachable
    /// (absorption <= 0.99).
    pub absorption_model: AbsorptionModel,
    /// Pin every config to this T60 instead of sampling it.
    pub fixed_t60_s: Option<f64>,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            scattering: DEFAULT_SCATTERING,
            absorption_model: AbsorptionModel::default(),
            fixed_t60_s: None,
        }
    }
}

/// Deterministic config number `index` of the stream keyed by `seed`.
pub fn sample_config(seed: u64, index: u64) -> Result<RoomConfig> {
    sample_config_with(seed, index, &SamplerSettings::default())
}

pub fn sample_config_with(seed: u64, index: u64, settings: &SamplerSettings) -> Result<RoomConfig> {
    let mut rng = substream(seed, domain::CONFIG, index);
    let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * rng.gen::<f64>();
    let dims = Vec3::new(
        uniform(DIMS_MIN_M[0], DIMS_MAX_M[0]),
        uniform(DIMS_MIN_M[1], DIMS_MAX_M[1]),
        uniform(DIMS_MIN_M[2], DIMS_MAX_M[2]),
    );

    let min_t60 = min_achievable_t60(settings.absorption_model, dims)?;
    let t60 = match settings.fixed_t60_s {
        Some(t) => t,
        None => {
            let mut attempt = 0;
            loop {
                let t = uniform(T60_RANGE_S[0], T60_RANGE_S[1]);
                if t >= min_t60 {
                    break t;
                }
                attempt += 1;
                if attempt >= MAX_ATTEMPTS {
                    return Err(Error::SamplingFailed {
                        attempts: attempt,
                        what: "reachable T60 target",
                    });
                }
            }
        }
    };

    let mut config = place(&mut rng, dims, t60)?;
    config.scattering = settings.scattering;
    config.seed = seed;
    config.index = index;
    Ok(config)
}

/// Random protocol-conforming source and array placement in a given room.
pub fn place_in_room(dims: Vec3, t60: f64, seed: u64) -> Result<RoomConfig> {
    let mut rng = substream(seed, domain::PLACEMENT, 0);
    let mut config = place(&mut rng, dims, t60)?;
    config.seed = seed;
    Ok(config)
}

fn place(rng: &mut StreamRng, dims: Vec3, t60: f64) -> Result<RoomConfig> {
    let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * rng.gen::<f64>();
    // The array centre keeps an extra radius of clearance in the array plane
    // so every mic honours the wall margin at any rotation.
    let centre_lo = Vec3::new(
        WALL_MARGIN_M + ARRAY_RADIUS_M,
        WALL_MARGIN_M + ARRAY_RADIUS_M,
        WALL_MARGIN_M,
    );
    let centre_hi = dims - centre_lo;
    if !(0..3).all(|k| centre_hi[k] > centre_lo[k]) {
        return Err(Error::invalid(
            "room_dims_m",
            "room too small for the wall margin",
        ));
    }
    let src_lo = Vec3::splat(WALL_MARGIN_M);
    let src_hi = dims - src_lo;
    let mut attempt = 0;
    let (source, centre) = loop {
        let c = Vec3::new(
            uniform(centre_lo.x, centre_hi.x),
            uniform(centre_lo.y, centre_hi.y),
            uniform(centre_lo.z, centre_hi.z),
        );
        let s = Vec3::new(
            uniform(src_lo.x, src_hi.x),
            uniform(src_lo.y, src_hi.y),
            uniform(src_lo.z, src_hi.z),
        );
        let d = s.distance(c);
        if (DISTANCE_RANGE_M[0]..=DISTANCE_RANGE_M[1]).contains(&d) {
            break (s, c);
        }
        attempt += 1;
        if attempt >= MAX_ATTEMPTS {
            return Err(Error::SamplingFailed {
                attempts: attempt,
                what: "source-array distance",
            });
        }
    };
    let rotation = uniform(0.0, std::f64::consts::TAU);
    Ok(RoomConfig::new(dims, t60, source, centre, rotation))
}
