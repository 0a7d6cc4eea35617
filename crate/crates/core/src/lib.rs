//! Simulation and analysis of heralded non-Gaussian states produced by
//! photon subtraction from narrowband-filtered CW squeezed light.

pub mod error;
pub mod fock;
pub mod hermite;
pub mod mode_est;
pub mod optimize;
pub mod pipeline;
pub mod simulate;
pub mod spectra;
pub mod temporal;
pub mod tomography;

pub use error::{Error, Result};
