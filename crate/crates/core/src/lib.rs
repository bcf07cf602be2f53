//! Numerical core for a tunable dielectric-loaded microwave cavity addressing
//! a single NV⁻ spin.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computations:
//!
//! * [`geometry`]: axisymmetric cavity description and its rasterization.
//! * [`modesolver`]: finite-difference TE₀ eigenmodes, mode classification,
//!   plunger tuning and geometry calibration.
//! * [`fieldmap`]: evanescent magnetic field below the open cavity bottom.
//! * [`nvodmr`]: NV⁻ ODMR synthesis, saturation, Lorentzian fitting and
//!   spatial contrast scans.
//! * [`axisinversion`]: recovery of the NV major axis from three contrasts.
//!
//! File formats, configuration and the command line live in the `nvcav`
//! companion crate.

#![no_std]
#![deny(missing_debug_implementations)]
// NaN-rejecting checks are written as `!(x > 0.0)`; index loops mirror the
// stencil formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod axisinversion;
mod error;
pub mod fieldmap;
pub mod geometry;
pub mod linalg;
pub mod modesolver;
pub mod nvodmr;
pub mod optim;
pub mod vec3;

pub use error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Angular wavenumber squared `(2πf/c)²` for a frequency in Hz.
pub fn wavenumber_sq(frequency: f64) -> f64 {
    let k = 2.0 * core::f64::consts::PI * frequency / SPEED_OF_LIGHT;
    k * k
}

/// Frequency in Hz for an eigenvalue `λ = (ω/c)²`.
pub fn frequency_of(eigenvalue: f64) -> f64 {
    SPEED_OF_LIGHT * libm::sqrt(eigenvalue) / (2.0 * core::f64::consts::PI)
}
