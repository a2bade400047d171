//! Configuration, CLI orchestration, persistence, and report emission.

pub mod checkpoint;
pub mod config;
pub mod output;
pub mod report;
pub mod runner;

pub use checkpoint::{checkpoint_load, checkpoint_save};
pub use config::{emit_config, parse_config, InitSpec, RunConfig};
pub use report::Report;
pub use runner::{run, Command, RunOutcome};
