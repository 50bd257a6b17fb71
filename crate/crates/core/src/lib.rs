//! Guide-slide superabsorption photocell model.
//!
//! Rings of interacting optical dipoles are coupled to a band-gap-suppressed photon bath,
//! local phonon baths and a heat-engine trap. The steady state of the resulting
//! Bloch-Redfield master equation yields the photocell's current, voltage and power.

pub mod constants;
pub mod error;
pub mod geometry;
pub mod operators;
pub mod hamiltonian;
pub mod environment;
pub mod superop;
pub mod dissipators;
pub mod liouvillian;
pub mod heatengine;
pub mod experiments;

pub use error::{Error, Result};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
