//! Command-line harness: configuration, fixtures and the stage wiring
//! behind the `dualring` binary.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod pipeline;
pub mod seed;
pub mod stages;
