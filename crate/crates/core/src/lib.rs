pub mod analysis;
pub mod cli;
pub mod cost;
pub mod demand;
pub mod equilibrium;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod network;

pub use error::{Error, Result};
