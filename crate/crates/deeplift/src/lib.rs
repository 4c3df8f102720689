//! File formats, parallel execution and the command-line front end for
//! [`deeplift_core`].
//!
//! - [`model_io`]: versioned JSON model files.
//! - [`formats`]: input vectors, sequence datasets, attribution and benchmark tables.
//! - [`config`]: TOML training configuration.
//! - [`parallel`]: a rayon gradient executor and order-preserving maps.
//! - [`cli`]: the `deeplift` binary.

pub mod cli;
pub mod config;
mod error;
pub mod formats;
pub mod manifest;
pub mod model_io;
pub mod parallel;

pub use deeplift_core as core;
pub use error::{Error, Result};
