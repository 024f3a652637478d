pub mod attacks;
pub mod defenses;
pub mod error;
pub mod harness;
pub mod rng;
pub mod snn;
pub mod telemetry;
pub mod workload;

pub use error::{Error, Result};
