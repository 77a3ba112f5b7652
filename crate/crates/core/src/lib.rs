pub mod cascade;
pub mod error;
pub mod fields;
pub mod kernels;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod stokes;
pub mod vec3;

pub use error::{Error, Result};
pub use vec3::{CVec3, Vec3};
