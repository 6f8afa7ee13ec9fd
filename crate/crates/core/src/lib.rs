//! Simulation of a two-ion phonon laser: one ion heats the shared motional
//! mode, the other cools it.

pub mod banded;
pub mod config;
pub mod error;
pub mod export;
pub mod lindblad;
pub mod meanfield;
pub mod models;
pub mod ode;
pub mod operator;
pub mod phasespace;
pub mod special;
pub mod sweep;
pub mod tasks;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
