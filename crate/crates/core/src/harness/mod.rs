//! Experiment plumbing: configuration, Monte-Carlo runs, result files, the
//! built-in property suite and timing.

pub mod bench;
pub mod config;
pub mod output;
pub mod run;
pub mod scenario;
pub mod verify;

pub use config::ExperimentConfig;
pub use run::{simulate, RunResult, Series, THREADS_ENV};
