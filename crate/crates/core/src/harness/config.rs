//! Experiment configuration (JSON).
//!
//! ```json
//! {
//!   "scenario": "twoVfour_nearoptimal",
//!   "trials": 50,
//!   "seed": 0,
//!   "horizon": 2000,
//!   "algorithms": ["MetaBSG", "BSG", "CommandOnly"],
//!   "world": { "robot_speed": 3.0, "target_speed": 0.02, "fov_radius": 10.0 },
//!   "learner": { "meta_update": "paper", "agent_eta_scale": 64.0 },
//!   "output": { "dir": "results" }
//! }
//! ```
//!
//! Every section and field except `scenario` is optional. A `custom`
//! scenario supplies `world.custom` with explicit robots, targets and one
//! command path per robot.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scenario::{Scenario, ScenarioKind};
use crate::coordination::{Algorithm, CoordinatorConfig};
use crate::error::{Error, Result};
use crate::learners::MetaUpdate;
use crate::tracksim::{CommandPath, RobotConfig, TargetConfig, WorldConfig};

pub const DEFAULT_TRIALS: usize = 50;
pub const DEFAULT_HORIZON: usize = 2000;
pub const DEFAULT_AGENT_ETA_SCALE: f64 = 64.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub world: WorldSection,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::MetaBsg, Algorithm::Bsg, Algorithm::CommandOnly]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub robot_speed: f64,
    pub target_speed: f64,
    pub fov_radius: f64,
    pub range_sigma0: f64,
    pub bearing_sigma0: f64,
    pub step_hz: f64,
    pub estimate_smoothing: Option<f64>,
    pub custom: Option<CustomWorld>,
}

impl Default for WorldSection {
    fn default() -> Self {
        let p = super::scenario::WorldParams::default();
        Self {
            robot_speed: p.robot_speed,
            target_speed: p.target_speed,
            fov_radius: p.fov_radius,
            range_sigma0: p.range_sigma0,
            bearing_sigma0: p.bearing_sigma0,
            step_hz: p.step_hz,
            estimate_smoothing: p.estimate_smoothing,
            custom: None,
        }
    }
}

impl WorldSection {
    pub fn params(&self) -> super::scenario::WorldParams {
        super::scenario::WorldParams {
            robot_speed: self.robot_speed,
            target_speed: self.target_speed,
            fov_radius: self.fov_radius,
            range_sigma0: self.range_sigma0,
            bearing_sigma0: self.bearing_sigma0,
            step_hz: self.step_hz,
            estimate_smoothing: self.estimate_smoothing,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomWorld {
    pub robots: Vec<RobotConfig>,
    pub targets: Vec<TargetConfig>,
    pub commands: Vec<CommandPath>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSection {
    pub meta_update: MetaUpdate,
    pub agent_eta_scale: f64,
    pub ordering: Option<Vec<usize>>,
}

impl Default for LearnerSection {
    fn default() -> Self {
        Self {
            meta_update: MetaUpdate::Paper,
            agent_eta_scale: DEFAULT_AGENT_ETA_SCALE,
            ordering: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads, parses and validates; unreadable files are I/O errors.
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must not be empty");
        }
        let mut seen = HashSet::new();
        if !self.algorithms.iter().all(|a| seen.insert(*a)) {
            return bad("algorithms must not repeat");
        }
        let scale = self.learner.agent_eta_scale;
        if !(scale.is_finite() && scale > 0.0) {
            return bad("learner.agent_eta_scale must be positive");
        }
        if self.seed.checked_add(self.trials as u64).is_none() {
            return bad("seed + trials overflows");
        }
        match (self.scenario, &self.world.custom) {
            (ScenarioKind::Custom, None) => return bad("scenario custom requires world.custom"),
            (ScenarioKind::Custom, Some(_)) => {}
            (_, Some(_)) => return bad("world.custom is only allowed with scenario custom"),
            _ => {}
        }
        let scenario = self.scenario()?;
        if scenario.commands.len() != scenario.world.robots.len() {
            return bad("world.custom needs exactly one command path per robot");
        }
        if let Some(order) = &self.learner.ordering {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..scenario.world.robots.len()).collect::<Vec<_>>() {
                return bad("learner.ordering must be a permutation of the robot indices");
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        match &self.world.custom {
            Some(c) => {
                let world = WorldConfig {
                    robots: c.robots.clone(),
                    targets: c.targets.clone(),
                    horizon: self.horizon,
                    step_hz: self.world.step_hz,
                    estimate_smoothing: self.world.estimate_smoothing,
                };
                world.validate()?;
                for (i, p) in c.commands.iter().enumerate() {
                    if p.waypoints.is_empty() {
                        return Err(Error::Config(format!("command path {i} is empty")));
                    }
                }
                Ok(Scenario {
                    world,
                    commands: c.commands.clone(),
                })
            }
            None => Scenario::build(self.scenario, &self.world.params(), self.horizon),
        }
    }

    /// Coordinator settings for trial `trial`.
    pub fn coordinator(&self, trial: usize) -> CoordinatorConfig {
        CoordinatorConfig {
            seed: self.trial_seed(trial),
            ordering: self.learner.ordering.clone(),
            meta_update: self.learner.meta_update,
            agent_eta_scale: self.learner.agent_eta_scale,
            pin_strategy: None,
        }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed + trial as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_json(r#"{"scenario": "twoVtwo_suboptimal"}"#).unwrap();
        assert_eq!(c.trials, 50);
        assert_eq!(c.horizon, 2000);
        assert_eq!(c.algorithms.len(), 3);
        assert_eq!(c.learner.meta_update, MetaUpdate::Paper);
        assert_eq!(c.scenario().unwrap().world.robots.len(), 2);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            r#"{"scenario": "twoVtwo_suboptimal", "trials": 0}"#,
            r#"{"scenario": "twoVtwo_suboptimal", "algorithms": []}"#,
            r#"{"scenario": "twoVtwo_suboptimal", "algorithms": ["BSG", "BSG"]}"#,
            r#"{"scenario": "twoVtwo_suboptimal", "algorithms": ["Greedy"]}"#,
            r#"{"scenario": "nowhere"}"#,
            r#"{"scenario": "custom"}"#,
            r#"{"scenario": "twoVtwo_suboptimal", "world": {"target_speed": 5.0}}"#,
            r#"{"scenario": "twoVtwo_suboptimal", "learner": {"ordering": [0, 0]}}"#,
            r#"{"scenario": "twoVtwo_suboptimal", "colour": "blue"}"#,
            "not json",
        ] {
            assert!(
                matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn custom_world_round_trip() {
        let text = r#"{
            "scenario": "custom", "horizon": 5,
            "world": {"custom": {
                "robots": [{"start": [0, 0], "speed": 1, "fov_radius": 5,
                            "range_sigma0": 0, "bearing_sigma0": 0}],
                "targets": [{"waypoints": [[1, 1], [4, 1]], "speed": 0.5}],
                "commands": [{"waypoints": [[0, 0], [3, 0]], "speed": 0.5}]
            }}
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        let s = c.scenario().unwrap();
        assert_eq!(s.world.horizon, 5);
        assert_eq!(s.commands.len(), 1);
    }
}
