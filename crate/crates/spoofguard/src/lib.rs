//! Input/output, synthetic data and orchestration around `spoofguard-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod frontend;
pub mod manifest;
pub mod pipeline;
pub mod scores;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
