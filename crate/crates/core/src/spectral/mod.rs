//! Periodic grids, Fourier transforms, differentiation and Sobolev norms.

mod fft;
mod field;
mod grid;
mod norms;
pub mod random;

pub use fft::Transformer;
pub use field::{DealiasRule, SurfaceField, MAX_DERIVATIVE_ORDER};
pub use grid::PeriodicGrid;
pub use norms::{half_norm, hs_norm, sobolev_norm, HalfNormWeight, SobolevIndex};
