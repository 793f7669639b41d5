//! Polarization decoherence of light pulses in a triangular ring cavity and
//! its suppression by bang-bang decoupling.
//!
//! The crate is organized bottom-up: [`jones`] holds the 2x2 algebra,
//! [`elements`] and [`cavity`] build the round-trip unitaries, [`engine`]
//! averages them over the Gaussian phase measure, and [`analytic`],
//! [`tomography`] and [`fitting`] analyze the resulting states.

pub mod analytic;
pub mod cavity;
pub mod elements;
pub mod engine;
pub mod error;
pub mod fitting;
pub mod io;
pub mod jones;
pub mod quadrature;
pub mod spectral;
pub mod tomography;

pub use error::{Error, Result};
