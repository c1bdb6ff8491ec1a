//! Scene geometry, ray casting, reflection sampling and microphone arrays.

mod array;
mod bvh;
mod ray;
mod sampling;
mod scene;
mod vec3;

pub use array::{circular_array, CircularArray};
pub use bvh::Bvh;
pub use ray::{Hit, Ray};
pub(crate) use sampling::reflect_unchecked;
pub use sampling::{reflect_specular, sample_lambert, sample_uniform_sphere};
pub use scene::{make_shoebox, Aabb, Scene, Shoebox, Surface, Triangle};
pub use vec3::Vec3;
