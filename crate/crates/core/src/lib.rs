#![no_std]
//! Deterministic numerics for query-based streaming tracking and trajectory
//! prediction, and the metric suite used to compare such pipelines against a
//! tracking-by-detection baseline.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assignment;
pub mod decoders;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod map_encoding;
pub mod math;
pub mod metrics;
pub mod query_bank;
pub mod scenario;

pub use error::{Error, Result};
