pub mod attacks;
pub mod data;
pub mod dp;
pub mod error;
pub mod he;
pub mod metrics;
mod modarith;
pub mod numerics;
pub mod optimizers;
pub mod orchestrator;
pub mod rng;
pub mod smc;
pub mod update;

pub use error::{Error, Result};
pub use rng::RngStream;
