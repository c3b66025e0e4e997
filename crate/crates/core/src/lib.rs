//! Pseudospectral solver for gravity-driven Darcy free-surface flow on the torus.
//!
//! The crate evaluates and inverts the Dirichlet–Neumann operator `G[η]`,
//! computes slowly traveling waves by a fixed-point iteration around the
//! explicit solution `η = -φ`, integrates the surface evolution in the frame
//! moving with the applied pressure, and measures decay of perturbations.

pub mod dn;
pub mod error;
pub mod evolution;
pub mod krylov;
pub mod spectral;
pub mod stability;
pub mod traveling_wave;

pub use error::{Error, Result};
