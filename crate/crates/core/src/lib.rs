//! Numerical core for phonon-number-selective spin flips on a trapped ion.
//!
//! The crate is `no_std` (it needs `alloc`). IO, configuration and the
//! command line live in the `phonon-map` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod crab;
pub mod error;
pub mod fidelity;
pub mod linalg;
pub mod model;
pub mod poincare;
pub mod propagator;
pub mod qnd;

pub use error::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
