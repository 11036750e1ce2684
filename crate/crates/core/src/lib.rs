//! Simulation of Sagnac-loop intensity modulators driven by a traveling-wave
//! phase modulator, with the Mach-Zehnder modulator as the point of
//! comparison.

pub mod drift;
pub mod drive;
pub mod error;
pub mod interference;
pub mod pattern;
pub mod traveling_wave;

pub use error::{Error, Result};
