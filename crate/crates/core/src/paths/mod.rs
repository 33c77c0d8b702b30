//! Hat-function wavelet basis, randomized path sampling under a
//! configurable representative law, shape filters, and the joint
//! second-stage/first-stage composition.

mod basis;
mod modulus;
mod path;
mod sample;

pub use basis::{hat, scaled_hat, shifts_at, BasisSpec, ClipMode, CoefficientLaw, Direction};
pub use modulus::{ext_modulus, HatExpansion};
pub use path::{compose, LevelCoeffs, Path, PathPair, Transform};
pub use sample::{sample_paths, PathSampler, ShapeFilter};
