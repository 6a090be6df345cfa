//! Exact equilibrium state of a harmonic particle coupled to a bath of
//! harmonic oscillators, and the interference contrast it allows.
//!
//! The bath is a mass distribution `mu(omega)` ([`spectral`]); tracing it
//! out of the global thermal state leaves the particle in a Gaussian
//! mixture characterised by an effective temperature and mass
//! ([`equilibrium`]). A brute-force discretised bath ([`finite_bath`])
//! serves as the exact-diagonalization oracle for the continuum-limit
//! formulas, and [`interferometer`] turns the reduced state into
//! Aharonov–Bohm fringe contrast and a transverse coherence length.

pub mod equilibrium;
pub mod error;
pub mod finite_bath;
pub mod interferometer;
pub mod particle;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use particle::ParticleParams;
pub use spectral::{BathResponse, PoleKind, PoleRecord, SpectralDensity};
