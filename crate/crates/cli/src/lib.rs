//! Driver crate for the wave-tank library: flat key/value experiment
//! configurations, parallel sweep execution, CSV tables with fixed schemas,
//! and a JSON manifest that makes every run reproducible from its output
//! directory alone.

pub mod config;
pub mod csv;
pub mod experiments;
pub mod output;
pub mod presets;
