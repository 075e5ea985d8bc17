//! Capacity bounds for MIMO power-line channels with periodically
//! time-varying responses and cyclostationary non-Gaussian noise.
//!
//! The periodic channel and noise shaping filter are lifted to a two-tap
//! time-invariant block channel ([`model`]), evaluated on a frequency grid
//! ([`spectra`]), and combined with noise entropy rates ([`entropy`]) into
//! water-filling based upper and lower capacity bounds ([`capacity`]).
//! [`noisegen`] holds the preset noise laws and samplers, and [`scenario`]
//! the synthetic channel generator and named scenarios.

pub mod capacity;
pub mod entropy;
pub mod error;
mod knn;
pub mod linalg;
pub mod model;
pub mod noisegen;
pub mod scenario;
pub mod spectra;

pub use error::{CapacityError, Result};
