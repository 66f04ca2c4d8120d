//! UWB radargram synthesis, heart-rate estimation and a sinusoidal
//! perturbation defense against radar vital-sign sensing.

pub mod config;
pub mod defense;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod radargram;
pub mod schedule;

pub use error::{Error, Result};
