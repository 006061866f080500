//! File formats, configuration, sweeps and reports around the `xtramac-core`
//! MAC model. The `xtramac` binary is a thin front end over this crate.

pub mod config;
pub mod formats_file;
pub mod report;
pub mod sample;
pub mod schema;
pub mod sweep;
pub mod vectors;

pub use xtramac_core as core;
