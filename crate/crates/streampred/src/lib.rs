//! File formats, parallel evaluation and the `streampred` command line on
//! top of `streampred-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod parallel;
pub mod report;
pub mod scene_io;

pub use error::{AppError, Result};
