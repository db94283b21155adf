//! Frequency-domain interior sound field estimation.
//!
//! Given pressure measurements at scattered microphone positions, the crate
//! reconstructs the field over a source-free region at a single frequency.
//! Three estimator families are provided: linear expansions into Helmholtz
//! solutions (plane waves, spherical waves, equivalent sources) fit by ridge
//! regression or an ℓ1 solver, kernel ridge regression with
//! Helmholtz-adapted kernels, and small neural networks trained with an
//! optional Helmholtz residual penalty. A shoebox room simulator and an
//! evaluation harness close the loop from scene description to error plots.
//!
//! Start with the `examples/` directory; each example exercises one of the
//! capabilities end to end.

pub mod error;
pub mod expansion;
pub mod harness;
pub mod kernel;
mod linalg;
pub mod neural;
pub mod sim;
pub mod specfun;

pub use error::{Error, Result};

/// Cartesian position in metres.
pub type Point3 = nalgebra::Vector3<f64>;

/// Speed of sound used throughout, in metres per second.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Wavenumber k = 2πf/c at frequency `f` in hertz.
pub fn wavenumber(frequency_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * frequency_hz / SPEED_OF_SOUND
}
