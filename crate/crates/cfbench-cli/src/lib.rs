//! Library side of the benchmark harness: run configuration, the sweep
//! engine, CSV/PGM emission, and the subcommand implementations the `cfbench`
//! binary dispatches to.

pub mod commands;
pub mod config;
pub mod pgm;
pub mod report;
pub mod sweep;
