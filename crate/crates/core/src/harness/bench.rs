//! Per-step timing and evaluation counting behind the `bench` command.

use std::time::Instant;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::coordination::{Algorithm, Coordinator};
use crate::error::Result;
use crate::tracksim::{TrackingEnvironment, WaypointCommand};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchEntry {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub agents: usize,
    pub mean_step_micros: f64,
    pub max_step_micros: f64,
    /// Gated evaluations per agent over the episode.
    pub evaluations_per_agent: Vec<usize>,
    pub total_evaluations: usize,
    pub meta_updates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub entries: Vec<BenchEntry>,
}

/// Times one episode (trial 0) of every configured algorithm.
pub fn run_bench(config: &ExperimentConfig) -> Result<BenchReport> {
    config.validate()?;
    let scenario = config.scenario()?;
    let agents = scenario.world.robots.len();
    let mut entries = Vec::new();
    for &algorithm in &config.algorithms {
        let mut env = TrackingEnvironment::new(
            scenario.world.clone(),
            WaypointCommand::new(scenario.commands.clone())?,
            config.trial_seed(0),
        )?;
        let mut coordinator = Coordinator::new(algorithm, &vec![8; agents], config.horizon, config.coordinator(0))?;
        let mut evaluations = vec![0; agents];
        let mut meta_updates = 0;
        let (mut total, mut max) = (0.0f64, 0.0f64);
        for t in 0..config.horizon {
            let start = Instant::now();
            let record = coordinator.step(&mut env, t)?;
            let micros = start.elapsed().as_secs_f64() * 1e6;
            total += micros;
            max = max.max(micros);
            for (e, n) in evaluations.iter_mut().zip(&record.evaluations) {
                *e += n;
            }
            meta_updates += record.meta_updates;
        }
        entries.push(BenchEntry {
            algorithm,
            horizon: config.horizon,
            agents,
            mean_step_micros: total / config.horizon as f64,
            max_step_micros: max,
            total_evaluations: evaluations.iter().sum(),
            evaluations_per_agent: evaluations,
            meta_updates,
        });
    }
    Ok(BenchReport { entries })
}
