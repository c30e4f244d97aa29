//! Simulation and error analysis of multi-pulse Raman atom interferometers
//! in which the intermediate optical state decays out of the clock
//! transition.

pub mod amplitude;
pub mod cli;
pub mod config;
pub mod density;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod output;
pub mod physics;
pub mod stats;

pub use error::{Error, Result};
