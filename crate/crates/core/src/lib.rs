//! Chiral two-mode waveguide QED: single- and two-photon scattering off a
//! chain of emitters coupled to two co-propagating modes, and a passive
//! controlled-phase gate built on it.

pub mod acceptance;
pub mod error;
pub mod gate;
pub mod io;
pub mod model;
pub mod polariton;
pub mod single_photon;
pub mod two_photon;
pub mod two_polariton;

pub use error::{Error, Result};
pub use model::{FrequencyGrid, GateConfig, GridSpec, ModelParams, RunManifest};
