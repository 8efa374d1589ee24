//! Built-in tracking scenarios.
//!
//! Both scenarios use straight target trajectories that cross in the middle
//! of the episode. Command paths are time-parameterized references:
//!
//! * `twoVtwo_suboptimal`: two robots, two crossing targets; each robot is
//!   commanded along a line that stays at least `2·fov` from every target
//!   path.
//! * `twoVfour_nearoptimal`: two robots, two pairs of targets; each pair
//!   crosses at its own point and the pairs head apart. Each robot is
//!   commanded along the midpoint of one pair, which intersects both of that
//!   pair's paths at the crossing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracksim::{CommandPath, Point, RobotConfig, TargetConfig, WorldConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "twoVtwo_suboptimal")]
    TwoVsTwoSuboptimal,
    #[serde(rename = "twoVfour_nearoptimal")]
    TwoVsFourNearOptimal,
    #[serde(rename = "custom")]
    Custom,
}

/// Knobs shared by the built-in scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldParams {
    pub robot_speed: f64,
    pub target_speed: f64,
    pub fov_radius: f64,
    pub range_sigma0: f64,
    pub bearing_sigma0: f64,
    pub step_hz: f64,
    pub estimate_smoothing: Option<f64>,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            robot_speed: 3.0,
            target_speed: 0.02,
            fov_radius: 10.0,
            range_sigma0: 0.1,
            bearing_sigma0: 0.02,
            step_hz: 20.0,
            estimate_smoothing: None,
        }
    }
}

/// A world plus one command path per robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub world: WorldConfig,
    pub commands: Vec<CommandPath>,
}

impl Scenario {
    pub fn build(kind: ScenarioKind, params: &WorldParams, horizon: usize) -> Result<Self> {
        let s = match kind {
            ScenarioKind::TwoVsTwoSuboptimal => two_vs_two(params, horizon),
            ScenarioKind::TwoVsFourNearOptimal => two_vs_four(params, horizon),
            ScenarioKind::Custom => {
                return Err(Error::Config(
                    "custom scenarios carry their own robots, targets and commands".into(),
                ))
            }
        };
        s.world.validate()?;
        Ok(s)
    }
}

fn unit(deg: f64) -> Point {
    Point::from_polar(1.0, deg.to_radians())
}

/// Straight trajectory through `center`, reached after `cross` target steps;
/// the trajectory ends after `horizon` steps.
fn crossing(center: Point, heading_deg: f64, speed: f64, cross: usize, horizon: usize) -> TargetConfig {
    let dir = unit(heading_deg);
    TargetConfig {
        waypoints: vec![
            center - dir * (speed * cross as f64),
            center + dir * (speed * horizon.saturating_sub(cross) as f64),
        ],
        speed,
    }
}

fn robot(p: &WorldParams, start: Point) -> RobotConfig {
    RobotConfig {
        start,
        speed: p.robot_speed,
        fov_radius: p.fov_radius,
        range_sigma0: p.range_sigma0,
        bearing_sigma0: p.bearing_sigma0,
    }
}

fn world(p: &WorldParams, robots: Vec<RobotConfig>, targets: Vec<TargetConfig>, horizon: usize) -> WorldConfig {
    WorldConfig {
        robots,
        targets,
        horizon,
        step_hz: p.step_hz,
        estimate_smoothing: p.estimate_smoothing,
    }
}

/// Command path along the midpoint of `targets` shifted by `offset`, in
/// lockstep with them.
fn follow(targets: &[&TargetConfig], offset: Point, horizon: usize) -> CommandPath {
    let at = |s: f64| {
        let sum = targets.iter().fold(Point::default(), |acc, tg| {
            acc + crate::tracksim::polyline_point(&tg.waypoints, tg.speed * s)
        });
        sum * (1.0 / targets.len() as f64) + offset
    };
    let (a, b) = (at(0.0), at(horizon as f64));
    let steps = horizon.max(1) as f64;
    CommandPath {
        waypoints: vec![a, b],
        speed: a.distance(b) / steps,
    }
}

fn two_vs_two(p: &WorldParams, horizon: usize) -> Scenario {
    let mid = horizon / 2;
    let half_angle = 15.0;
    let targets = vec![
        crossing(Point::default(), half_angle, p.target_speed, mid, horizon),
        crossing(Point::default(), -half_angle, p.target_speed, mid, horizon),
    ];
    let lateral = targets
        .iter()
        .flat_map(|tg| tg.waypoints.iter().map(|w| w.y.abs()))
        .fold(0.0, f64::max);
    // far enough that no point of a command line comes within 2·fov of a
    // target path
    let gap = lateral + 2.5 * p.fov_radius;
    let robots = targets
        .iter()
        .map(|tg| robot(p, tg.waypoints[0] + Point::new(0.0, -3.0_f64.copysign(tg.waypoints[0].y))))
        .collect::<Vec<_>>();
    let commands = [-gap, gap]
        .iter()
        .zip(&targets)
        .map(|(&y, tg)| {
            let mut path = follow(&[tg], Point::default(), horizon);
            for w in &mut path.waypoints {
                w.y = y;
            }
            path.speed = path.waypoints[0].distance(path.waypoints[1]) / horizon.max(1) as f64;
            path
        })
        .collect();
    Scenario {
        world: world(p, robots, targets, horizon),
        commands,
    }
}

fn two_vs_four(p: &WorldParams, horizon: usize) -> Scenario {
    let mid = horizon / 2;
    let spread = 8.0;
    let centers = [(Point::new(0.0, 12.0), 20.0), (Point::new(0.0, -12.0), -20.0)];
    let targets: Vec<TargetConfig> = centers
        .iter()
        .flat_map(|&(c, heading)| {
            [
                crossing(c, heading + spread, p.target_speed, mid, horizon),
                crossing(c, heading - spread, p.target_speed, mid, horizon),
            ]
        })
        .collect();
    let commands: Vec<CommandPath> = targets
        .chunks(2)
        .map(|pair| follow(&[&pair[0], &pair[1]], Point::default(), horizon))
        .collect();
    let start_x = targets
        .iter()
        .map(|tg| tg.waypoints[0].x)
        .fold(f64::INFINITY, f64::min)
        - 1.5 * p.fov_radius;
    let robots = vec![
        robot(p, Point::new(start_x, 3.0)),
        robot(p, Point::new(start_x, -3.0)),
    ];
    Scenario {
        world: world(p, robots, targets, horizon),
        commands,
    }
}
