//! Fixtures shared by the benchmarks.

use bandit_coord::harness::scenario::{Scenario, ScenarioKind, WorldParams};
use bandit_coord::submodular::WeightedCoverage;
use bandit_coord::tracksim::{TrackingEnvironment, WaypointCommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tracking_env(kind: ScenarioKind, horizon: usize, seed: u64) -> TrackingEnvironment<WaypointCommand> {
    let s = Scenario::build(kind, &WorldParams::default(), horizon).expect("built-in scenario");
    TrackingEnvironment::new(s.world, WaypointCommand::new(s.commands).expect("commands"), seed).expect("valid world")
}

/// Coverage instance where every agent has exactly `actions` actions.
pub fn coverage(agents: usize, actions: usize, horizon: usize, seed: u64) -> WeightedCoverage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..32).map(|_| 1.0 - rng.random::<f64>()).collect();
    let covers = (0..agents)
        .map(|_| (0..actions).map(|_| rng.random::<u64>() & 0xffff_ffff).collect())
        .collect();
    WeightedCoverage::new(covers, weights, horizon).expect("well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use bandit_coord::submodular::SetFunction;

    #[test]
    fn coverage_has_requested_shape() {
        let f = coverage(3, 4, 10, 1);
        assert_eq!(f.action_counts(), &[4, 4, 4]);
        assert_eq!(f.horizon(), 10);
    }
}
