//! Scenario parsing, trial assembly and the batch runner behind the
//! `stairclear` command-line tool.

pub mod batch;
pub mod config;
pub mod scenario;
pub mod state;
