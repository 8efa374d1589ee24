//! Multi-robot target tracking on a 2-D plane.
//!
//! Robots move in one of eight compass directions at constant speed, sense
//! targets inside a disk-shaped field of view with range/bearing noise that
//! grows with distance, and share measurements so that each observed target
//! gets one fused position estimate per step. The per-step objective is the
//! negative harmonic-sum of estimated distances, with `−4·d_max` charged for
//! every target no robot can see.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coordination::{CommandSource, Environment};
use crate::error::{Error, Result};
use crate::rng;
use crate::submodular::{normalize, ActionId, AgentId, JointAction, Normalized, SetFunction};

/// Distances below this are floored before inversion.
const DISTANCE_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// The eight motion primitives, in their canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MoveAction {
    Up,
    Down,
    Left,
    Right,
    UpLeft,
    UpRight,
    DownLeft,
    DownRight,
}

impl MoveAction {
    pub const ALL: [MoveAction; 8] = [
        MoveAction::Up,
        MoveAction::Down,
        MoveAction::Left,
        MoveAction::Right,
        MoveAction::UpLeft,
        MoveAction::UpRight,
        MoveAction::DownLeft,
        MoveAction::DownRight,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&a| a == self).expect("listed")
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Unit vector; diagonals are normalized so every move has equal length.
    pub fn direction(self) -> Point {
        let d = FRAC_1_SQRT_2;
        match self {
            MoveAction::Up => Point::new(0.0, 1.0),
            MoveAction::Down => Point::new(0.0, -1.0),
            MoveAction::Left => Point::new(-1.0, 0.0),
            MoveAction::Right => Point::new(1.0, 0.0),
            MoveAction::UpLeft => Point::new(-d, d),
            MoveAction::UpRight => Point::new(d, d),
            MoveAction::DownLeft => Point::new(-d, -d),
            MoveAction::DownRight => Point::new(d, -d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub start: Point,
    /// Metres per step.
    pub speed: f64,
    pub fov_radius: f64,
    /// Range standard deviation at zero distance (m).
    pub range_sigma0: f64,
    /// Bearing standard deviation at zero distance (rad).
    pub bearing_sigma0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub waypoints: Vec<Point>,
    /// Metres per step along the polyline.
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub robots: Vec<RobotConfig>,
    pub targets: Vec<TargetConfig>,
    pub horizon: usize,
    /// Nominal re-selection rate; informational only.
    #[serde(default = "default_step_hz")]
    pub step_hz: f64,
    /// Weight of the new fused estimate when blending with the previous
    /// step's estimate; `None` uses the current step only.
    #[serde(default)]
    pub estimate_smoothing: Option<f64>,
}

fn default_step_hz() -> f64 {
    20.0
}

impl WorldConfig {
    /// Largest sensing range among the robots.
    pub fn d_max(&self) -> f64 {
        self.robots.iter().map(|r| r.fov_radius).fold(0.0, f64::max)
    }

    /// Range of the raw objective: `4·d_max·|targets|`.
    pub fn objective_range(&self) -> f64 {
        4.0 * self.d_max() * self.targets.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.robots.is_empty() {
            return bad("at least one robot is required".into());
        }
        if self.targets.is_empty() {
            return bad("at least one target is required".into());
        }
        for (i, r) in self.robots.iter().enumerate() {
            if !(r.speed.is_finite() && r.speed > 0.0) {
                return bad(format!("robot {i}: speed must be positive"));
            }
            if !(r.fov_radius.is_finite() && r.fov_radius > 0.0) {
                return bad(format!("robot {i}: fov_radius must be positive"));
            }
            if !(r.range_sigma0 >= 0.0 && r.bearing_sigma0 >= 0.0) {
                return bad(format!("robot {i}: noise levels must be non-negative"));
            }
            if !(r.start.x.is_finite() && r.start.y.is_finite()) {
                return bad(format!("robot {i}: start must be finite"));
            }
        }
        let slowest_robot = self.robots.iter().map(|r| r.speed).fold(f64::INFINITY, f64::min);
        for (j, tg) in self.targets.iter().enumerate() {
            if tg.waypoints.is_empty() {
                return bad(format!("target {j}: empty trajectory"));
            }
            if !(tg.speed.is_finite() && tg.speed > 0.0) {
                return bad(format!("target {j}: speed must be positive"));
            }
            if tg.speed >= slowest_robot {
                return bad(format!(
                    "target {j}: speed {} must be below every robot's speed",
                    tg.speed
                ));
            }
        }
        if let Some(a) = self.estimate_smoothing {
            if !(a > 0.0 && a <= 1.0) {
                return bad(format!("estimate_smoothing must be in (0, 1], got {a}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub robot: usize,
    pub target: usize,
    pub range: f64,
    pub bearing: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    /// Number of target advances so far.
    pub t: usize,
    pub robots: Vec<Point>,
    pub targets: Vec<Point>,
    pub estimates: Vec<Option<Point>>,
    pub measurements: Vec<Measurement>,
}

impl WorldState {
    pub fn initial(config: &WorldConfig) -> Self {
        Self {
            t: 0,
            robots: config.robots.iter().map(|r| r.start).collect(),
            targets: config.targets.iter().map(|tg| tg.waypoints[0]).collect(),
            estimates: vec![None; config.targets.len()],
            measurements: Vec::new(),
        }
    }

    pub fn observed(&self, target: usize) -> bool {
        self.estimates[target].is_some()
    }
}

/// Point at arc length `s` along a polyline; holds the last waypoint after
/// the end.
pub fn polyline_point(waypoints: &[Point], mut s: f64) -> Point {
    for w in waypoints.windows(2) {
        let len = w[0].distance(w[1]);
        if s <= len {
            if len == 0.0 {
                return w[0];
            }
            return w[0] + (w[1] - w[0]) * (s / len);
        }
        s -= len;
    }
    *waypoints.last().expect("non-empty polyline")
}

/// Moves every target one step along its trajectory.
pub fn step_targets(state: &mut WorldState, config: &WorldConfig) {
    state.t += 1;
    for (pos, tg) in state.targets.iter_mut().zip(&config.targets) {
        *pos = polyline_point(&tg.waypoints, tg.speed * state.t as f64);
    }
}

/// Moves every robot by `speed` along its commanded direction.
pub fn apply_actions(state: &mut WorldState, actions: &JointAction, config: &WorldConfig) -> Result<()> {
    for (i, r) in config.robots.iter().enumerate() {
        let index = actions
            .get(AgentId(i))
            .ok_or_else(|| Error::Parameter(format!("no action for robot {i}")))?;
        let dir = MoveAction::from_index(index)
            .ok_or(Error::UnknownAction {
                action: ActionId::new(i, index),
            })?
            .direction();
        state.robots[i] = state.robots[i] + dir * r.speed;
    }
    Ok(())
}

fn noise_scale(sigma0: f64, distance: f64, d_max: f64) -> f64 {
    sigma0 * (1.0 + distance / d_max)
}

/// Takes range/bearing measurements of every target inside each robot's
/// field of view and fuses them into one estimate per target by an
/// inverse-variance weighted mean of the measured points.
///
/// Two standard-normal variates are consumed per robot–target pair whether
/// or not the target is visible, so the noise stream does not depend on
/// where the robots are.
pub fn sense_and_fuse(state: &mut WorldState, config: &WorldConfig, rng: &mut ChaCha8Rng) {
    let d_max = config.d_max();
    let mut points: Vec<Vec<(Point, f64)>> = vec![Vec::new(); config.targets.len()];
    state.measurements.clear();
    for (i, r) in config.robots.iter().enumerate() {
        let p = state.robots[i];
        for (j, &truth) in state.targets.iter().enumerate() {
            let zr: f64 = rng.sample(StandardNormal);
            let zb: f64 = rng.sample(StandardNormal);
            let d = p.distance(truth);
            if d > r.fov_radius {
                continue;
            }
            let sr = noise_scale(r.range_sigma0, d, d_max);
            let sb = noise_scale(r.bearing_sigma0, d, d_max);
            let range = (d + sr * zr).max(0.0);
            let bearing = (truth - p).angle() + sb * zb;
            state.measurements.push(Measurement {
                robot: i,
                target: j,
                range,
                bearing,
            });
            let variance = sr * sr + (d * sb).powi(2);
            points[j].push((p + Point::from_polar(range, bearing), variance));
        }
    }
    for (j, obs) in points.into_iter().enumerate() {
        let fused = fuse(&obs);
        state.estimates[j] = match (fused, state.estimates[j], config.estimate_smoothing) {
            (Some(new), Some(old), Some(a)) => Some(new * a + old * (1.0 - a)),
            (new, _, _) => new,
        };
    }
}

fn fuse(obs: &[(Point, f64)]) -> Option<Point> {
    if obs.is_empty() {
        return None;
    }
    let exact: Vec<Point> = obs.iter().filter(|(_, v)| *v == 0.0).map(|(p, _)| *p).collect();
    if !exact.is_empty() {
        let n = exact.len() as f64;
        return Some(exact.into_iter().fold(Point::default(), |a, p| a + p) * (1.0 / n));
    }
    let total: f64 = obs.iter().map(|(_, v)| 1.0 / v).sum();
    Some(
        obs.iter()
            .fold(Point::default(), |a, (p, v)| a + *p * (1.0 / v))
            * (1.0 / total),
    )
}

/// Sum over targets of the distance to the nearest robot.
pub fn total_min_distance(state: &WorldState) -> f64 {
    state
        .targets
        .iter()
        .map(|&tg| {
            state
                .robots
                .iter()
                .map(|&r| r.distance(tg))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Snapshot of one step from which `f_t` is evaluated for any set of robot
/// actions: pre-move robot positions, true target positions (visibility) and
/// the step's shared target estimates (distances).
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingObjective {
    origins: Vec<Point>,
    speeds: Vec<f64>,
    fovs: Vec<f64>,
    truth: Vec<Point>,
    estimates: Vec<Option<Point>>,
    d_max: f64,
    counts: Vec<usize>,
}

impl TrackingObjective {
    pub fn new(
        origins: Vec<Point>,
        truth: Vec<Point>,
        estimates: Vec<Option<Point>>,
        config: &WorldConfig,
    ) -> Self {
        Self {
            speeds: config.robots.iter().map(|r| r.speed).collect(),
            fovs: config.robots.iter().map(|r| r.fov_radius).collect(),
            counts: vec![MoveAction::ALL.len(); origins.len()],
            origins,
            truth,
            estimates,
            d_max: config.d_max(),
        }
    }

    pub fn range(&self) -> f64 {
        4.0 * self.d_max * self.truth.len() as f64
    }

    fn position(&self, action: ActionId) -> Result<Point> {
        let i = action.agent.0;
        let dir = MoveAction::from_index(action.index)
            .filter(|_| i < self.origins.len())
            .ok_or(Error::UnknownAction { action })?
            .direction();
        Ok(self.origins[i] + dir * self.speeds[i])
    }

    /// Raw objective in `[−4·d_max·|targets|, 0]`.
    pub fn raw(&self, set: &JointAction) -> Result<f64> {
        let robots = set
            .iter()
            .map(|a| Ok((a.agent.0, self.position(a)?)))
            .collect::<Result<Vec<_>>>()?;
        let unseen = -4.0 * self.d_max;
        let mut total = 0.0;
        for (truth, estimate) in self.truth.iter().zip(&self.estimates) {
            let Some(estimate) = estimate else {
                total += unseen;
                continue;
            };
            let mut inverse = 0.0;
            let mut seen = false;
            let mut on_target = false;
            for &(i, p) in &robots {
                if p.distance(*truth) > self.fovs[i] {
                    continue;
                }
                seen = true;
                let d = p.distance(*estimate);
                if d == 0.0 {
                    on_target = true;
                    break;
                }
                inverse += 1.0 / d.max(DISTANCE_FLOOR);
            }
            total += if !seen {
                unseen
            } else if on_target {
                0.0
            } else {
                (-1.0 / inverse).max(unseen)
            };
        }
        Ok(total)
    }
}

impl SetFunction for TrackingObjective {
    fn action_counts(&self) -> &[usize] {
        &self.counts
    }

    fn horizon(&self) -> usize {
        1
    }

    fn upper_bound(&self) -> f64 {
        0.0
    }

    /// The snapshot belongs to a single step; `t` is ignored.
    fn value(&self, _t: usize, set: &JointAction) -> Result<f64> {
        self.raw(set)
    }
}

/// Raw `f_t` of `actions` taken from `origins`, given `state`'s true target
/// positions and estimates.
pub fn tracking_objective(
    origins: &[Point],
    state: &WorldState,
    actions: &JointAction,
    config: &WorldConfig,
) -> Result<f64> {
    TrackingObjective::new(
        origins.to_vec(),
        state.targets.clone(),
        state.estimates.clone(),
        config,
    )
    .raw(actions)
}

/// Time-parameterized desired trajectory for one robot: the reference point
/// moves along `waypoints` at `speed` metres per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandPath {
    pub waypoints: Vec<Point>,
    pub speed: f64,
}

impl CommandPath {
    /// Reference point at step `t`.
    pub fn reference(&self, t: usize) -> Point {
        polyline_point(&self.waypoints, self.speed * t as f64)
    }
}

/// The move whose direction is closest in angle to `to − from`; exact ties
/// (within 1e−9 rad) go to the earlier action in [`MoveAction::ALL`].
pub fn best_direction(from: Point, to: Point) -> MoveAction {
    let v = to - from;
    if v.norm() < 1e-12 {
        return MoveAction::ALL[0];
    }
    let heading = v.angle();
    let mut best = (MoveAction::ALL[0], f64::INFINITY);
    for a in MoveAction::ALL {
        let mut err = (a.direction().angle() - heading).abs() % (2.0 * PI);
        if err > PI {
            err = 2.0 * PI - err;
        }
        if err < best.1 - 1e-9 {
            best = (a, err);
        }
    }
    best.0
}

/// Commands each robot toward its desired trajectory's next reference point.
#[derive(Clone, Debug)]
pub struct WaypointCommand {
    paths: Vec<CommandPath>,
}

impl WaypointCommand {
    pub fn new(paths: Vec<CommandPath>) -> Result<Self> {
        for (i, p) in paths.iter().enumerate() {
            if p.waypoints.is_empty() {
                return Err(Error::Parameter(format!("command path {i} is empty")));
            }
            if !(p.speed.is_finite() && p.speed >= 0.0) {
                return Err(Error::Parameter(format!("command path {i}: bad speed {}", p.speed)));
            }
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[CommandPath] {
        &self.paths
    }
}

impl CommandSource<WorldState> for WaypointCommand {
    fn command(&mut self, t: usize, state: &WorldState) -> Result<JointAction> {
        if self.paths.len() != state.robots.len() {
            return Err(Error::Parameter(format!(
                "{} command paths for {} robots",
                self.paths.len(),
                state.robots.len()
            )));
        }
        Ok(self
            .paths
            .iter()
            .zip(&state.robots)
            .enumerate()
            .map(|(i, (path, &pos))| ActionId::new(i, best_direction(pos, path.reference(t + 1)).index()))
            .collect())
    }
}

/// Tracking world wired up as a coordination [`Environment`].
///
/// Step `t` advances the targets once, lets the robots act from their
/// current positions, senses, and returns the normalized objective of that
/// step.
pub struct TrackingEnvironment<C = WaypointCommand> {
    config: WorldConfig,
    state: WorldState,
    commands: C,
    noise: ChaCha8Rng,
    counts: Vec<usize>,
    range: f64,
}

impl<C: CommandSource<WorldState>> TrackingEnvironment<C> {
    pub fn new(config: WorldConfig, commands: C, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state: WorldState::initial(&config),
            counts: vec![MoveAction::ALL.len(); config.robots.len()],
            range: config.objective_range(),
            noise: rng::stream(seed, rng::SENSOR_STREAM),
            commands,
            config,
        })
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    fn begin(&mut self, t: usize) {
        while self.state.t <= t {
            step_targets(&mut self.state, &self.config);
        }
    }

    fn snapshot(&self, origins: Vec<Point>, estimates: Vec<Option<Point>>) -> Result<Normalized<TrackingObjective>> {
        normalize(
            TrackingObjective::new(origins, self.state.targets.clone(), estimates, &self.config),
            self.range,
        )
    }
}

impl<C: CommandSource<WorldState>> Environment for TrackingEnvironment<C> {
    type Objective = Normalized<TrackingObjective>;

    fn action_counts(&self) -> &[usize] {
        &self.counts
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn command(&mut self, t: usize) -> Result<JointAction> {
        self.begin(t);
        self.commands.command(t, &self.state)
    }

    /// Clairvoyant objective: estimates equal the true positions.
    fn preview(&mut self, t: usize) -> Result<Self::Objective> {
        self.begin(t);
        let truth = self.state.targets.iter().copied().map(Some).collect();
        self.snapshot(self.state.robots.clone(), truth)
    }

    fn execute(&mut self, t: usize, executed: &JointAction) -> Result<Self::Objective> {
        self.begin(t);
        let origins = self.state.robots.clone();
        apply_actions(&mut self.state, executed, &self.config)?;
        sense_and_fuse(&mut self.state, &self.config, &mut self.noise);
        self.snapshot(origins, self.state.estimates.clone())
    }

    fn metric(&self) -> Option<f64> {
        Some(total_min_distance(&self.state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordination::FnCommand;
    use crate::submodular::{verify_definition1, Verification};
    use rand::SeedableRng;

    fn robot(x: f64, y: f64) -> RobotConfig {
        RobotConfig {
            start: Point::new(x, y),
            speed: 1.0,
            fov_radius: 10.0,
            range_sigma0: 0.0,
            bearing_sigma0: 0.0,
        }
    }

    fn target(waypoints: &[[f64; 2]], speed: f64) -> TargetConfig {
        TargetConfig {
            waypoints: waypoints.iter().map(|&p| p.into()).collect(),
            speed,
        }
    }

    fn world(robots: Vec<RobotConfig>, targets: Vec<TargetConfig>) -> WorldConfig {
        WorldConfig {
            robots,
            targets,
            horizon: 10,
            step_hz: 20.0,
            estimate_smoothing: None,
        }
    }

    fn close(a: Point, b: Point) -> bool {
        a.distance(b) < 1e-12
    }

    #[test]
    fn zero_speed_target_stays_put() {
        let cfg = world(vec![robot(0.0, 0.0)], vec![target(&[[3.0, 4.0], [10.0, 4.0]], 0.0)]);
        let mut s = WorldState::initial(&cfg);
        for _ in 0..5 {
            step_targets(&mut s, &cfg);
        }
        assert!(close(s.targets[0], Point::new(3.0, 4.0)));
    }

    #[test]
    fn straight_segment_displacement() {
        let cfg = world(vec![robot(0.0, 0.0)], vec![target(&[[0.0, 0.0], [30.0, 40.0]], 0.5)]);
        let mut s = WorldState::initial(&cfg);
        for _ in 0..10 {
            step_targets(&mut s, &cfg);
        }
        assert!(close(s.targets[0], Point::new(3.0, 4.0)));
        // holds at the final waypoint
        for _ in 0..200 {
            step_targets(&mut s, &cfg);
        }
        assert!(close(s.targets[0], Point::new(30.0, 40.0)));
    }

    #[test]
    fn crossing_lines_meet_where_planned() {
        // both are 10 m from the origin at 0.5 m/step, so they meet at step 20
        let cfg = world(
            vec![robot(0.0, 0.0)],
            vec![
                target(&[[-10.0, 0.0], [10.0, 0.0]], 0.5),
                target(&[[0.0, -10.0], [0.0, 14.0]], 0.5),
            ],
        );
        let mut s = WorldState::initial(&cfg);
        for _ in 0..20 {
            step_targets(&mut s, &cfg);
        }
        assert!(close(s.targets[0], s.targets[1]));
        assert!(close(s.targets[0], Point::new(0.0, 0.0)));
    }

    #[test]
    fn moves_have_unit_length() {
        let cfg = world(vec![robot(0.0, 0.0), robot(5.0, 5.0)], vec![target(&[[0.0, 0.0]], 0.1)]);
        let mut s = WorldState::initial(&cfg);
        let right_upright = JointAction::from_indices(&[
            MoveAction::Right.index(),
            MoveAction::UpRight.index(),
        ]);
        apply_actions(&mut s, &right_upright, &cfg).unwrap();
        assert!(close(s.robots[0], Point::new(1.0, 0.0)));
        assert!(close(s.robots[1], Point::new(5.0 + FRAC_1_SQRT_2, 5.0 + FRAC_1_SQRT_2)));
        let back = JointAction::from_indices(&[
            MoveAction::Left.index(),
            MoveAction::DownLeft.index(),
        ]);
        apply_actions(&mut s, &back, &cfg).unwrap();
        assert!(close(s.robots[0], Point::new(0.0, 0.0)));
        assert!(close(s.robots[1], Point::new(5.0, 5.0)));
    }

    #[test]
    fn noiseless_sensing_is_exact() {
        let cfg = world(vec![robot(0.0, 0.0), robot(30.0, 0.0)], vec![
            target(&[[3.0, 4.0]], 0.1),
            target(&[[-50.0, 0.0]], 0.1),
        ]);
        let mut s = WorldState::initial(&cfg);
        let mut rng = rng::stream(1, rng::SENSOR_STREAM);
        sense_and_fuse(&mut s, &cfg, &mut rng);
        assert!(close(s.estimates[0].unwrap(), Point::new(3.0, 4.0)));
        assert!(!s.observed(1));
        assert_eq!(s.measurements.len(), 1);
    }

    #[test]
    fn equal_variance_fusion_is_midpoint() {
        let a = Point::new(1.0, 2.0);
        let b = Point::new(3.0, -2.0);
        let m = fuse(&[(a, 0.25), (b, 0.25)]).unwrap();
        assert!(close(m, Point::new(2.0, 0.0)));
        // two robots at equal distance see equal variances
        let mut cfg = world(vec![robot(-4.0, 0.0), robot(4.0, 0.0)], vec![target(&[[0.0, 3.0]], 0.1)]);
        for r in &mut cfg.robots {
            r.range_sigma0 = 0.3;
            r.bearing_sigma0 = 0.05;
        }
        let mut s = WorldState::initial(&cfg);
        let mut rng = rng::stream(3, rng::SENSOR_STREAM);
        sense_and_fuse(&mut s, &cfg, &mut rng);
        let pts: Vec<Point> = s
            .measurements
            .iter()
            .map(|m| s.robots[m.robot] + Point::from_polar(m.range, m.bearing))
            .collect();
        assert!(close(s.estimates[0].unwrap(), (pts[0] + pts[1]) * 0.5));
    }

    #[test]
    fn objective_examples() {
        let cfg = world(vec![robot(0.0, 0.0)], vec![target(&[[2.0, 0.0]], 0.1)]);
        let mut s = WorldState::initial(&cfg);
        s.estimates[0] = Some(Point::new(3.0, 0.0));
        // robot moves right to (1, 0): estimated distance 2 → −1/(1/2) = −2
        let right = JointAction::from_indices(&[MoveAction::Right.index()]);
        let origins = [Point::new(0.0, 0.0)];
        assert_eq!(tracking_objective(&origins, &s, &right, &cfg).unwrap(), -2.0);
        // nobody sees it: −4·d_max
        s.targets[0] = Point::new(100.0, 0.0);
        assert_eq!(tracking_objective(&origins, &s, &right, &cfg).unwrap(), -40.0);
        // robot lands exactly on the estimate
        s.targets[0] = Point::new(1.0, 0.0);
        s.estimates[0] = Some(Point::new(1.0, 0.0));
        assert_eq!(tracking_objective(&origins, &s, &right, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn normalized_objective_example() {
        let cfg = world(vec![robot(0.0, 0.0)], vec![target(&[[2.0, 0.0]], 0.1)]);
        let f = TrackingObjective::new(
            vec![Point::new(0.0, 0.0)],
            vec![Point::new(2.0, 0.0)],
            vec![Some(Point::new(3.0, 0.0))],
            &cfg,
        );
        assert_eq!(f.raw(&JointAction::empty()).unwrap(), -40.0);
        let g = normalize(f, cfg.objective_range()).unwrap();
        let right = JointAction::from_indices(&[MoveAction::Right.index()]);
        assert!((g.value(0, &right).unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn extra_observer_never_hurts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = world(vec![robot(0.0, 0.0), robot(0.0, 0.0)], vec![target(&[[0.0, 0.0]], 0.1)]);
        for _ in 0..500 {
            let pt = |rng: &mut ChaCha8Rng| Point::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
            let truth = pt(&mut rng);
            let f = TrackingObjective::new(
                vec![pt(&mut rng), pt(&mut rng)],
                vec![truth],
                vec![Some(truth + Point::new(0.1, -0.1))],
                &cfg,
            );
            for a in 0..8 {
                for b in 0..8 {
                    let one = JointAction::from_iter([ActionId::new(0, a)]);
                    let both = one.with(ActionId::new(1, b)).unwrap();
                    assert!(f.raw(&both).unwrap() >= f.raw(&one).unwrap());
                }
            }
        }
    }

    #[test]
    fn normalized_objective_is_submodular_on_a_small_case() {
        let cfg = world(vec![robot(0.0, 0.0), robot(6.0, 0.0)], vec![
            target(&[[3.0, 1.0]], 0.1),
            target(&[[9.0, -2.0]], 0.1),
        ]);
        let f = TrackingObjective::new(
            vec![Point::new(0.0, 0.0), Point::new(6.0, 0.0)],
            vec![Point::new(3.0, 1.0), Point::new(9.0, -2.0)],
            vec![Some(Point::new(3.1, 0.9)), Some(Point::new(8.9, -2.05))],
            &cfg,
        );
        let g = normalize(f, cfg.objective_range()).unwrap();
        assert_eq!(verify_definition1(&g, 0).unwrap(), Verification::Pass);
    }

    #[test]
    fn total_min_distance_examples() {
        let s = WorldState {
            t: 0,
            robots: vec![Point::new(0.0, 0.0)],
            targets: vec![Point::new(3.0, 4.0), Point::new(0.0, 1.0)],
            estimates: vec![None, None],
            measurements: vec![],
        };
        assert_eq!(total_min_distance(&s), 6.0);
        let on_top = WorldState {
            robots: vec![Point::new(3.0, 4.0), Point::new(0.0, 1.0)],
            ..s.clone()
        };
        assert_eq!(total_min_distance(&on_top), 0.0);
        let swapped = WorldState {
            robots: vec![Point::new(0.0, 1.0), Point::new(3.0, 4.0)],
            ..s
        };
        assert_eq!(total_min_distance(&swapped), 0.0);
    }

    #[test]
    fn command_directions() {
        let o = Point::new(0.0, 0.0);
        assert_eq!(best_direction(o, Point::new(5.0, 0.0)), MoveAction::Right);
        let at = |deg: f64| Point::from_polar(1.0, deg.to_radians());
        assert_eq!(best_direction(o, at(44.0)), MoveAction::UpRight);
        assert_eq!(best_direction(o, at(22.0)), MoveAction::Right);
        assert_eq!(best_direction(o, at(23.0)), MoveAction::UpRight);
        assert_eq!(best_direction(o, at(22.5)), MoveAction::Right);
        assert_eq!(best_direction(o, at(-135.0)), MoveAction::DownLeft);
        assert_eq!(best_direction(o, at(180.0)), MoveAction::Left);
    }

    #[test]
    fn empty_command_path_is_rejected() {
        let p = CommandPath {
            waypoints: vec![],
            speed: 1.0,
        };
        assert!(WaypointCommand::new(vec![p]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = world(vec![robot(0.0, 0.0)], vec![target(&[[0.0, 0.0]], 0.5)]);
        assert!(cfg.validate().is_ok());
        cfg.targets[0].speed = 1.0;
        assert!(cfg.validate().is_err());
        cfg.targets[0].speed = 0.5;
        cfg.robots[0].speed = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn targets_ignore_robot_actions() {
        let cfg = WorldConfig {
            horizon: 30,
            ..world(
                vec![robot(0.0, 0.0), robot(2.0, 0.0)],
                vec![target(&[[0.0, 5.0], [20.0, 5.0]], 0.4)],
            )
        };
        let mut a = TrackingEnvironment::new(cfg.clone(), FnCommand(|_| JointAction::from_indices(&[0, 0])), 3).unwrap();
        let mut b = TrackingEnvironment::new(cfg, FnCommand(|_| JointAction::from_indices(&[0, 0])), 3).unwrap();
        for t in 0..30 {
            a.execute(t, &JointAction::from_indices(&[t % 8, 3])).unwrap();
            b.execute(t, &JointAction::from_indices(&[1, (t * 3) % 8])).unwrap();
            assert_eq!(a.state().targets, b.state().targets);
        }
    }
}
