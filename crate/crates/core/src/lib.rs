//! Numerical laboratory for Gaussian interface models with mixed gradient and
//! Laplacian interactions: lattice operators, Green's functions, exact
//! samplers, scaling-limit statistics and finite-difference error studies.

pub mod continuum;
pub mod error;
pub mod fdm;
pub mod green;
pub mod lattice;
pub mod operators;
pub mod quadrature;
pub mod report;
pub mod sampler;
pub mod scaling;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};
