//! Persistent Betti numbers of Vietoris–Rips filtrations: exact classical
//! engines, a numerical emulator of the quantum estimator, spectral gap
//! probes and an asymptotic resource model.

pub mod boundary;
pub mod classical;
pub mod complex;
pub mod emulator;
pub mod error;
pub mod exact;
pub mod fixtures;
pub mod gaps;
pub mod poly;
pub mod resources;

pub use error::{QtdaError, Result};
