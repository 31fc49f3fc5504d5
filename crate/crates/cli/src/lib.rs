//! Command-line front end for the elastography toolkit.
//!
//! Experiments are described by JSON configuration files naming a
//! pipeline (forward data generation, direct inversion, adjoint
//! descent, localized descent, or a gradient consistency check), a
//! grid, a phantom or input field, and solver settings. Each run
//! writes its artifacts and a checksummed manifest into an output
//! directory; finished runs can be compared side by side.

pub mod compare;
pub mod config;
pub mod image;
pub mod manifest;
pub mod metrics;
pub mod pipeline;

pub use compare::compare;
pub use config::ExperimentConfig;
pub use manifest::RunManifest;
pub use pipeline::{run, CliError};
