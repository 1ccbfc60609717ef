//! Simulation and verification toolkit for the self-repelling Brownian polymer.
//!
//! The crate is organised bottom-up:
//!
//! * [`potential`] – the Gaussian self-interaction and its Fourier transform;
//! * [`field`] – periodic grids, the stationary Gaussian environment and interpolation;
//! * [`srbp`] – Euler–Maruyama integration of the polymer with occupation-time deposition;
//! * [`scenery`] – Brownian motion in a frozen random scenery (the reversible comparison process);
//! * [`chaos`] – Fock-space operators in the Fourier representation, sector norms and resolvents;
//! * [`estimators`] – ensemble statistics with explicit verdicts;
//! * [`cli`] – the `srbp` command-line front end.
//!
//! Fourier transforms use the unitary convention
//! `f̂(p) = (2π)^{-d/2} ∫ e^{ip·x} f(x) dx` throughout.

pub mod chaos;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod fft;
pub mod field;
pub mod io;
pub mod potential;
pub mod rng;
pub mod scenery;
pub mod srbp;
pub mod stats;

pub use error::{Error, Result};
pub use field::{FieldRole, GridSpec, ScalarField, StationarySampler};
pub use potential::PotentialSpec;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 4;
