//! Partial-identification bounds on causal functionals in instrumental
//! variable models with continuous endogenous treatment.
//!
//! The pipeline: rescale observations into the unit cube ([`grid`]), sample
//! counterfactual path pairs from a hat-basis representative law
//! ([`paths`]), estimate the smoothed conditional CDF on a dyadic grid
//! ([`cdf`]), assemble the sparse indicator matrix and functional vector
//! ([`assembly`]), solve the penalized quadratic programs over the capped
//! simplex by ADMM ([`qp`]), and iterate sample/solve/discard until the
//! min/max solution paths stabilize ([`bounds`]). [`sim`] generates the
//! Gaussian-process benchmark data.

pub mod assembly;
pub mod bounds;
pub mod cdf;
pub mod error;
pub mod grid;
pub mod paths;
pub mod qp;
pub mod sim;

pub use error::{Error, Result};
