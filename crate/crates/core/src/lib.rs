//! Geometric room acoustics: shoebox and triangle-mesh scenes, an image
//! source engine, a Monte Carlo path tracer, impulse-response analysis and
//! a speech augmentation pipeline.
//!
//! The numeric core is generic over [`num::Real`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`; the `*F32` aliases
//! fix it to `f32`.

pub mod analysis;
pub mod augment;
pub mod dataset;
pub mod error;
pub mod gas;
pub mod geometry;
pub mod image;
pub mod io;
pub mod materials;
pub mod num;
pub mod rng;
pub mod sampler;
pub mod simulate;

pub use error::{Error, Result};

/// Speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

pub type Vec3 = geometry::Vec3<f64>;
pub type Aabb = geometry::Aabb<f64>;
pub type Triangle = geometry::Triangle<f64>;
pub type Scene = geometry::Scene<f64>;
pub type Ray = geometry::Ray<f64>;
pub type Hit = geometry::Hit<f64>;
pub type Material = materials::Material<f64>;
pub type ImpulseResponse = analysis::ImpulseResponse<f64>;
pub type EnergyDecayCurve = analysis::EnergyDecayCurve<f64>;
pub type ImageSource = image::ImageSource<f64>;
pub type EnergyHistogram = gas::EnergyHistogram<f64>;

pub type Vec3F32 = geometry::Vec3<f32>;
pub type SceneF32 = geometry::Scene<f32>;
pub type MaterialF32 = materials::Material<f32>;
pub type ImpulseResponseF32 = analysis::ImpulseResponse<f32>;
pub type EnergyHistogramF32 = gas::EnergyHistogram<f32>;
