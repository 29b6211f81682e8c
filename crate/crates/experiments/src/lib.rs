//! Experiment runners, configuration, plotting and run manifests for the
//! standard-map laboratory CLI.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod runs;
