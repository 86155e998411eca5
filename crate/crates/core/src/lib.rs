//! Distributed detection of ARMA signals in ARMA noise with the running
//! consensus detector.

pub mod analysis;
pub mod arma;
pub mod cli;
pub mod config;
pub mod detector;
pub mod error;
pub mod network;
pub mod scenario;
pub mod sim;
pub mod whitening;

pub use error::{AssumptionViolation, Error, Result};
