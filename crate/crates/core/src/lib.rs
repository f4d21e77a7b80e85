pub mod cli;
pub mod config;
pub mod data;
pub mod emu;
pub mod error;
pub mod grad;
pub mod harness;
pub mod model;
pub mod quant;

pub use config::{DendriteGradMode, NetworkConfig};
pub use error::{Error, Result};
pub use model::{DendriticLayer, Network, SpikeRecord};
