//! TVL factor-pricing research engine.
//!
//! The statistical pipeline lives in [`cryptofactor_core`]; this crate adds
//! the raw-data cache, the HTTP client, file emission, run configuration,
//! grid orchestration, the validation suite and the `cryptofactor` CLI.

pub mod cache;
pub mod client;
pub mod config;
pub mod emit;
pub mod error;
pub mod pipeline;
pub mod validation;

pub use cryptofactor_core as core;
pub use error::{Error, Result};
