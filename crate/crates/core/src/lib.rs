//! Entanglement-induced enhancement of resonant two-photon ionization by
//! SPDC photon pairs.
//!
//! The crate evaluates the entangled and separable two-photon momentum
//! amplitudes, their normalization constants, photon fluxes and f-factors,
//! and the enhancement ratio R = (C_ent/C_sep)(f_ent/f_sep), in the exact
//! (beyond-paraxial) and paraxial regimes. Integrals run either on the
//! narrowband (k_ix, k_sx) plane with adaptive cubature or over the full 6-D
//! momentum space with a Monte Carlo oracle.

pub mod amplitude;
pub mod error;
pub mod kernel;
pub mod observables;
pub mod oracle;
pub mod quadrature;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
