//! Key-rate modeling for measurement-device-independent twin-field QKD:
//! coherent-state gains, decoy-state bounds, BB84 and reference-frame-independent
//! rates, a photon-level Monte Carlo oracle and distance sweeps.

pub mod coherent;
pub mod config;
pub mod decoy;
pub mod error;
pub mod keyrate;
pub mod mathcore;
pub mod montecarlo;
pub mod optimize;
pub mod single_photon;
pub mod sweep;
pub mod validation;

pub use error::{Error, Result};
