//! Experiment harness around `krr-core`: flat TOML configs, seeded grid
//! runs, CSV tables and figure reproduction.

pub mod config;
pub mod figures;
pub mod run;
pub mod table;
