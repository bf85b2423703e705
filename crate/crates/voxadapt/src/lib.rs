//! Dataset IO, file formats, configuration and the benchmark pipeline built
//! on `voxadapt-core`.

pub mod config;
pub mod dataset;
pub mod formats;
pub mod pipeline;
pub mod report;

pub use config::RunConfig;
