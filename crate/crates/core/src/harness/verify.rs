//! Built-in property suite behind the `verify` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::scenario::{Scenario, ScenarioKind, WorldParams};
use crate::coordination::{
    run_episode_with, sequential_greedy, Algorithm, CoordinatorConfig, EpisodeTrace, FnCommand,
    StaticEnvironment,
};
use crate::error::Result;
use crate::learners::{sample_index, AgentLearner, Exp3Ix, Strategy};
use crate::oracle::best_joint_action;
use crate::submodular::{
    normalize, verify_definition1, JointAction, Normalized, SetFunction, SquaredCardinality,
    Verification, WeightedCoverage, TOLERANCE,
};
use crate::tracksim::{
    Point, RobotConfig, TargetConfig, TrackingEnvironment, TrackingObjective, WaypointCommand,
    WorldConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Adds a supermodular function that must be reported as a failure.
    pub inject_supermodular: bool,
}

/// Outcome of the sequential-greedy half-bound sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub instances: usize,
    /// `(instance, greedy value, optimum)` for every violation.
    pub violations: Vec<(usize, f64, f64)>,
    pub min_ratio: f64,
}

/// Sequential greedy against brute force on `instances` random coverage
/// functions with up to 3 agents and 5 actions each. Zero tolerance.
pub fn sg_half_bound_sweep(instances: usize, seed: u64) -> Result<SweepOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SweepOutcome {
        instances,
        violations: Vec::new(),
        min_ratio: f64::INFINITY,
    };
    for k in 0..instances {
        let agents = rng.random_range(1..=3);
        let elements = rng.random_range(2..=12);
        let f = WeightedCoverage::random(&mut rng, agents, 5, elements);
        let order: Vec<usize> = (0..agents).collect();
        let sg = f.value(0, &sequential_greedy(&f, 0, &order)?)?;
        let (_, opt, _) = best_joint_action(&f, 0)?;
        if sg < 0.5 * opt {
            out.violations.push((k, sg, opt));
        }
        if opt > 0.0 {
            out.min_ratio = out.min_ratio.min(sg / opt);
        }
    }
    Ok(out)
}

/// Random normalized tracking objective with `robots` robots and `targets`
/// targets in a 24 m box, noisy estimates and the default sensor radius.
pub fn random_tracking_instance<R: Rng + ?Sized>(
    rng: &mut R,
    robots: usize,
    targets: usize,
) -> Result<Normalized<TrackingObjective>> {
    let p = WorldParams::default();
    let pt = |r: &mut R| Point::new(r.random_range(-12.0..12.0), r.random_range(-12.0..12.0));
    let config = WorldConfig {
        robots: (0..robots)
            .map(|_| RobotConfig {
                start: pt(rng),
                speed: p.robot_speed,
                fov_radius: p.fov_radius,
                range_sigma0: p.range_sigma0,
                bearing_sigma0: p.bearing_sigma0,
            })
            .collect(),
        targets: (0..targets)
            .map(|_| TargetConfig {
                waypoints: vec![pt(rng)],
                speed: p.target_speed,
            })
            .collect(),
        horizon: 1,
        step_hz: p.step_hz,
        estimate_smoothing: None,
    };
    let truth: Vec<Point> = config.targets.iter().map(|t| t.waypoints[0]).collect();
    let estimates = truth
        .iter()
        .map(|&t| {
            let seen = rng.random_bool(0.9);
            seen.then(|| t + Point::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
        })
        .collect();
    let origins = config.robots.iter().map(|r| r.start).collect();
    normalize(
        TrackingObjective::new(origins, truth, estimates, &config),
        config.objective_range(),
    )
}

/// Largest `|Σ_i r_i − f_t(executed)|` over a trace, and whether every
/// step made exactly one gated evaluation per agent.
pub fn telescoping_error(trace: &EpisodeTrace) -> (f64, bool) {
    let mut worst: f64 = 0.0;
    let mut one_each = true;
    for s in &trace.steps {
        worst = worst.max((s.rewards.iter().sum::<f64>() - s.value).abs());
        one_each &= s.evaluations.iter().all(|&e| e == 1);
    }
    (worst, one_each)
}

fn definition1_check<F: SetFunction>(fs: impl Iterator<Item = Result<F>>) -> Result<(usize, Option<String>)> {
    let mut n = 0;
    for f in fs {
        let f = f?;
        n += 1;
        if let Verification::Counterexample(v) = verify_definition1(&f, 0)? {
            return Ok((n, Some(v.to_string())));
        }
    }
    Ok((n, None))
}

fn pseudo_regret_exp3ix(horizon: usize, seed: u64) -> Result<f64> {
    let means = [0.8, 0.2];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = Exp3Ix::new(horizon)?;
    let mut regret = 0.0;
    for _ in 0..horizon {
        let s = learner.distribution()?.sample(&mut rng);
        let mean = means[s.index()];
        let reward = if rng.random::<f64>() < mean { 1.0 } else { 0.0 };
        learner.update(s, reward)?;
        regret += means[0] - mean;
    }
    Ok(regret)
}

fn agent_learner_finds_best_arm(seed: u64) -> Result<bool> {
    let horizon = 5000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = AgentLearner::new(2, horizon)?;
    for _ in 0..horizon {
        let arm = sample_index(&learner.distribution()?, &mut rng);
        let mean = [0.8, 0.2][arm];
        learner.update(arm, if rng.random::<f64>() < mean { 1.0 } else { 0.0 })?;
    }
    Ok(learner.distribution()?[0] > 0.9)
}

pub fn run_verify(opts: VerifyOptions) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let coverage = (0..200).map(|_| {
        let agents = rng.random_range(1..=3);
        Ok(WeightedCoverage::random(&mut rng, agents, 3, 10))
    });
    let (n, bad) = definition1_check(coverage.collect::<Vec<_>>().into_iter())?;
    report.push(
        "coverage objectives are normalized, monotone, submodular",
        bad.is_none(),
        bad.unwrap_or_else(|| format!("{n} instances")),
    );

    let tracking: Vec<_> = (0..100).map(|_| random_tracking_instance(&mut rng, 2, 2)).collect();
    let (n, bad) = definition1_check(tracking.into_iter())?;
    report.push(
        "tracking objectives are normalized, monotone, submodular",
        bad.is_none(),
        bad.unwrap_or_else(|| format!("{n} random 2-robot/2-target instances")),
    );

    if opts.inject_supermodular {
        let f = SquaredCardinality::new(vec![2, 2, 2]);
        let (_, bad) = definition1_check(std::iter::once(Ok(f)))?;
        report.push(
            "injected squared-cardinality function is submodular",
            bad.is_none(),
            bad.unwrap_or_else(|| "no counterexample".into()),
        );
    }

    let sweep = sg_half_bound_sweep(1000, opts.seed.wrapping_add(1))?;
    report.push(
        "sequential greedy reaches half the optimum",
        sweep.violations.is_empty(),
        match sweep.violations.first() {
            None => format!("{} instances, min ratio {:.4}", sweep.instances, sweep.min_ratio),
            Some((k, sg, opt)) => format!("instance {k}: greedy {sg} < opt/2 = {}", opt / 2.0),
        },
    );

    let mut worst: f64 = 0.0;
    let mut one_each = true;
    for k in 0..20u64 {
        let f = WeightedCoverage::random(&mut rng, 3, 4, 12).with_horizon(100);
        let counts = f.action_counts().to_vec();
        let commands: Vec<JointAction> = (0..100)
            .map(|_| JointAction::from_indices(&counts.iter().map(|&c| rng.random_range(0..c)).collect::<Vec<_>>()))
            .collect();
        for alg in [Algorithm::Bsg, Algorithm::MetaBsg] {
            let cmds = commands.clone();
            let mut env = StaticEnvironment::new(f.clone(), FnCommand(move |t: usize| cmds[t].clone()));
            let trace = run_episode_with(alg, &mut env, CoordinatorConfig::with_seed(k), |_, _| {})?;
            let (w, o) = telescoping_error(&trace);
            worst = worst.max(w);
            one_each &= o;
        }
    }
    let scenario = Scenario::build(ScenarioKind::TwoVsFourNearOptimal, &WorldParams::default(), 200)?;
    let mut env = TrackingEnvironment::new(
        scenario.world.clone(),
        WaypointCommand::new(scenario.commands.clone())?,
        opts.seed,
    )?;
    let trace = run_episode_with(Algorithm::MetaBsg, &mut env, CoordinatorConfig::with_seed(opts.seed), |_, _| {})?;
    let (w, o) = telescoping_error(&trace);
    worst = worst.max(w);
    one_each &= o;
    report.push(
        "agent rewards telescope to the executed value",
        worst <= TOLERANCE,
        format!("max deviation {worst:.3e}"),
    );
    report.push(
        "one gated evaluation per agent per step",
        one_each,
        "BSG and MetaBSG on coverage and tracking episodes".into(),
    );

    let horizon = 2000;
    let regrets = (0..20)
        .map(|s| pseudo_regret_exp3ix(horizon, opts.seed.wrapping_add(100 + s)))
        .collect::<Result<Vec<_>>>()?;
    let mean = regrets.iter().sum::<f64>() / regrets.len() as f64;
    let bound = 8.0 * (horizon as f64 * std::f64::consts::LN_2).sqrt();
    report.push(
        "EXP3-IX regret on a Bernoulli pair stays below 8·sqrt(T ln 2)",
        mean <= bound,
        format!("mean pseudo-regret {mean:.1}, bound {bound:.1}"),
    );

    let wins = (0..10)
        .map(|s| agent_learner_finds_best_arm(opts.seed.wrapping_add(200 + s)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&w| w)
        .count();
    report.push(
        "agent learner concentrates on the better arm",
        wins >= 9,
        format!("{wins}/10 runs above 0.9"),
    );

    let d = Exp3Ix::new(100)?.distribution()?;
    report.push(
        "EXP3-IX starts uniform",
        (d.get(Strategy::ExtComm) - 0.5).abs() < TOLERANCE,
        format!("q = ({}, {})", d.get(Strategy::ExtComm), d.get(Strategy::Bsg)),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_on_a_few_instances() {
        let out = sg_half_bound_sweep(50, 9).unwrap();
        assert!(out.violations.is_empty());
        assert!(out.min_ratio >= 0.5);
    }

    #[test]
    fn injected_function_fails_verification() {
        let report = run_verify(VerifyOptions {
            seed: 0,
            inject_supermodular: true,
        })
        .unwrap();
        assert!(!report.passed());
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
        assert_eq!(failed.len(), 1);
        assert!(failed[0].detail.contains("diminishing returns"), "{}", failed[0].detail);
    }
}
