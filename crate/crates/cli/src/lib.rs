//! Experiment harness: JSON-configured commands writing CSV, JSON and SVG outputs.

pub mod config;
pub mod experiments;
pub mod output;
pub mod schema;
pub mod stats;
pub mod svg;

pub use config::ExperimentConfig;
