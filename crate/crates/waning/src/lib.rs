//! File formats and command-line workflows around `waning-core`.

pub mod cli;
pub mod format;
pub mod ingest;

pub use waning_core as core;
