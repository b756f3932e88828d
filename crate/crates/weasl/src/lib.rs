//! File formats, the experiment harness and the command line for
//! [`weasl_core`].
//!
//! - [`csv_io`]: dataset CSV files.
//! - [`model_io`]: scorer parameter and trained-model files.
//! - [`kv`]: `key=value` sidecars and config files.
//! - [`experiment`]: synthetic sweeps run in parallel over a grid of cells.
//! - [`report`]: summaries, plot data and SVG charts of sweep results.

pub mod csv_io;
pub mod error;
pub mod experiment;
pub mod kv;
pub mod model_io;
pub mod report;

pub use error::{Error, Result};
pub use weasl_core;
