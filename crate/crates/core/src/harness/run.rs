//! Monte-Carlo driver.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::scenario::Scenario;
use crate::coordination::{run_episode_with, Algorithm};
use crate::error::{Error, Result};
use crate::learners::Strategy;
use crate::oracle::{self, best_joint_action, HindsightSolution};
use crate::tracksim::{TrackingEnvironment, WaypointCommand};

/// Caps the worker pool when set to a positive integer.
pub const THREADS_ENV: &str = "BANDIT_COORD_THREADS";

/// One episode's time series.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub trial: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub values: Vec<f64>,
    pub total_min_distance: Vec<f64>,
    /// MetaBSG only.
    pub strategies: Vec<Option<Strategy>>,
    /// EXP3-IX mass on ExtComm before each draw; MetaBSG only.
    pub ext_comm_mass: Vec<f64>,
    pub evaluations_per_agent: Vec<usize>,
    pub meta_updates: usize,
    pub oracle: Option<OracleStats>,
}

impl Series {
    pub fn total_value(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Hindsight comparison on the sequence of objectives this episode produced.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct OracleStats {
    pub opt_total: f64,
    pub total: f64,
    pub delta_t: usize,
    pub min_shift_delta_t: usize,
    /// `Σ f_t(executed) / Σ f_t(opt)`; for a command-only episode this is
    /// the command's empirical β.
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub with_oracle: bool,
    /// Ordered by trial, then by the configured algorithm order.
    pub series: Vec<Series>,
}

impl RunResult {
    pub fn of(&self, algorithm: Algorithm) -> impl Iterator<Item = &Series> {
        self.series.iter().filter(move |s| s.algorithm == algorithm)
    }
}

/// Worker count from [`THREADS_ENV`]; `None` leaves the choice to rayon.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))
}

/// Runs one episode of `algorithm` in a fresh world seeded for `trial`.
pub fn run_trial(
    config: &ExperimentConfig,
    scenario: &Scenario,
    trial: usize,
    algorithm: Algorithm,
    with_oracle: bool,
) -> Result<Series> {
    let seed = config.trial_seed(trial);
    let commands = WaypointCommand::new(scenario.commands.clone())?;
    let mut env = TrackingEnvironment::new(scenario.world.clone(), commands, seed)?;
    if with_oracle {
        oracle::joint_space_size(&vec![8; scenario.world.robots.len()])?;
    }
    let mut per_step = Vec::new();
    let mut failure = None;
    let trace = run_episode_with(algorithm, &mut env, config.coordinator(trial), |record, f| {
        if with_oracle && failure.is_none() {
            match best_joint_action(f, record.t) {
                Ok(step) => per_step.push(step),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let oracle = with_oracle.then(|| {
        let solution = HindsightSolution::from_steps(per_step);
        let total = trace.total_value();
        OracleStats {
            opt_total: solution.total,
            total,
            delta_t: oracle::delta_t(&solution),
            min_shift_delta_t: oracle::min_shift_delta_t(&solution),
            beta: oracle::empirical_beta(&trace.values(), &solution).ok(),
        }
    });
    Ok(Series {
        trial,
        algorithm,
        seed,
        values: trace.values(),
        total_min_distance: trace.steps.iter().map(|s| s.metric.unwrap_or(f64::NAN)).collect(),
        strategies: trace.steps.iter().map(|s| s.strategy).collect(),
        ext_comm_mass: trace
            .steps
            .iter()
            .filter_map(|s| s.q.map(|q| q.get(Strategy::ExtComm)))
            .collect(),
        evaluations_per_agent: trace.evaluations_per_agent(),
        meta_updates: trace.steps.iter().map(|s| s.meta_updates).sum(),
        oracle,
    })
}

/// Runs every (trial, algorithm) pair on the capped worker pool.
pub fn simulate(config: &ExperimentConfig, with_oracle: bool) -> Result<RunResult> {
    config.validate()?;
    let scenario = config.scenario()?;
    let jobs: Vec<(usize, Algorithm)> = (0..config.trials)
        .flat_map(|trial| config.algorithms.iter().map(move |&a| (trial, a)))
        .collect();
    let series = thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|&(trial, a)| run_trial(config, &scenario, trial, a, with_oracle))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(RunResult {
        config: config.clone(),
        with_oracle,
        series,
    })
}
