//! Online learners.
//!
//! [`Exp3Ix`] arbitrates between the two strategies (follow the external
//! command, or follow BSG). [`AgentLearner`] is the per-agent bandit over an
//! agent's own action set; it is an EXP3-IX-style learner with fixed-share
//! mixing so that it can track a shifting best action.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which source of actions the team follows at a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    ExtComm,
    #[serde(rename = "BSG")]
    Bsg,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::ExtComm, Strategy::Bsg];

    pub fn index(self) -> usize {
        match self {
            Strategy::ExtComm => 0,
            Strategy::Bsg => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ExtComm => "ExtComm",
            Strategy::Bsg => "BSG",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Exponent used in the meta-learner's weight update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaUpdate {
    /// `z_s ← z_s · exp(η r̃_s / ‖r̃‖₁)`, the default.
    #[default]
    Paper,
    /// `z_s ← z_s · exp(η r̃_s)`, the usual EXP3-IX step.
    Standard,
}

/// Probability of following each strategy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrategyDistribution {
    pub q: [f64; 2],
}

impl StrategyDistribution {
    pub fn get(&self, s: Strategy) -> f64 {
        self.q[s.index()]
    }

    /// Point mass on `s`.
    pub fn pinned(s: Strategy) -> Self {
        let mut q = [0.0; 2];
        q[s.index()] = 1.0;
        Self { q }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Strategy {
        Strategy::ALL[sample_index(&self.q, rng)]
    }
}

/// Draws an index from a probability vector with a single uniform variate.
///
/// A component equal to 1 is selected with certainty, a zero component never.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left `acc` slightly below 1
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn check_reward(reward: f64) -> Result<()> {
    if (0.0..=1.0).contains(&reward) {
        Ok(())
    } else {
        Err(Error::RewardRange(reward))
    }
}

fn normalize_weights(w: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if !total.is_finite() || total <= 0.0 || w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::StateCorruption(format!("weights {w:?}")));
    }
    Ok(w.iter().map(|x| x / total).collect())
}

fn rescale_to_unit_mean(w: &mut [f64]) {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    if mean.is_finite() && mean > 0.0 {
        w.iter_mut().for_each(|x| *x /= mean);
    }
}

/// Implicit-exploration estimate: `1 − 1(chosen = arm)·(1 − reward)/(p_arm + γ)`.
fn ix_estimate(arm: usize, chosen: usize, p: f64, gamma: f64, reward: f64) -> f64 {
    if arm == chosen {
        1.0 - (1.0 - reward) / (p + gamma)
    } else {
        1.0
    }
}

/// Two-armed EXP3-IX over {ExtComm, BSG}.
#[derive(Clone, Debug, PartialEq)]
pub struct Exp3Ix {
    eta: f64,
    gamma: f64,
    z: [f64; 2],
    t: usize,
    horizon: usize,
    mode: MetaUpdate,
}

impl Exp3Ix {
    /// `η = sqrt(ln 2 / T)`, `γ = η / 2`, `z = (1, 1)`.
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Parameter("EXP3-IX horizon must be at least 1".into()));
        }
        let eta = (std::f64::consts::LN_2 / horizon as f64).sqrt();
        Ok(Self {
            eta,
            gamma: eta / 2.0,
            z: [1.0, 1.0],
            t: 1,
            horizon,
            mode: MetaUpdate::Paper,
        })
    }

    pub fn with_mode(mut self, mode: MetaUpdate) -> Self {
        self.mode = mode;
        self
    }

    /// Replaces the weights; used to start from a known state.
    pub fn with_weights(mut self, z: [f64; 2]) -> Result<Self> {
        if z.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Parameter(format!("weights must be positive, got {z:?}")));
        }
        self.z = z;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn weights(&self) -> [f64; 2] {
        self.z
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn mode(&self) -> MetaUpdate {
        self.mode
    }

    /// `q_t = z_t / ‖z_t‖₁`.
    pub fn distribution(&self) -> Result<StrategyDistribution> {
        let q = normalize_weights(&self.z)?;
        Ok(StrategyDistribution { q: [q[0], q[1]] })
    }

    /// Feeds the reward of the strategy actually followed and returns the
    /// reward estimates `r̃` used for the update.
    pub fn update(&mut self, chosen: Strategy, reward: f64) -> Result<[f64; 2]> {
        check_reward(reward)?;
        let q = self.distribution()?.q;
        let est = [0, 1].map(|s| ix_estimate(s, chosen.index(), q[s], self.gamma, reward));
        let scale = match self.mode {
            MetaUpdate::Paper => {
                let l1: f64 = est.iter().map(|r| r.abs()).sum();
                // the unchosen arm always has r̃ = 1
                assert!(l1 >= 1.0, "‖r̃‖₁ = {l1} with two arms");
                self.eta / l1
            }
            MetaUpdate::Standard => self.eta,
        };
        for (z, r) in self.z.iter_mut().zip(est) {
            *z *= (scale * r).exp();
        }
        rescale_to_unit_mean(&mut self.z);
        if self.z.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::StateCorruption(format!("meta weights {:?}", self.z)));
        }
        self.t += 1;
        Ok(est)
    }
}

/// Per-agent shifting bandit over `K` actions.
///
/// Each update applies an implicit-exploration reward estimate, an
/// exponential-weights step and a fixed-share mix toward uniform with rate
/// `α = 1/T`. Defaults: `η = sqrt(2 ln(KT) / (KT))`, `γ = η / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentLearner {
    eta: f64,
    gamma: f64,
    alpha: f64,
    w: Vec<f64>,
    t: usize,
    horizon: usize,
}

impl AgentLearner {
    pub fn new(arms: usize, horizon: usize) -> Result<Self> {
        Self::with_eta_scale(arms, horizon, 1.0)
    }

    /// As [`AgentLearner::new`] with `η` (and therefore `γ`) multiplied by
    /// `eta_scale`.
    pub fn with_eta_scale(arms: usize, horizon: usize, eta_scale: f64) -> Result<Self> {
        if arms == 0 || horizon == 0 {
            return Err(Error::Parameter(format!(
                "agent learner needs K ≥ 1 and T ≥ 1, got K={arms}, T={horizon}"
            )));
        }
        if !(eta_scale.is_finite() && eta_scale > 0.0) {
            return Err(Error::Parameter(format!("eta scale must be positive, got {eta_scale}")));
        }
        let kt = (arms * horizon) as f64;
        let eta = eta_scale * (2.0 * kt.ln() / kt).sqrt();
        Ok(Self {
            eta,
            gamma: eta / 2.0,
            alpha: 1.0 / horizon as f64,
            w: vec![1.0; arms],
            t: 1,
            horizon,
        })
    }

    pub fn arms(&self) -> usize {
        self.w.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn distribution(&self) -> Result<Vec<f64>> {
        normalize_weights(&self.w)
    }

    pub fn update(&mut self, chosen: usize, reward: f64) -> Result<()> {
        check_reward(reward)?;
        if chosen >= self.w.len() {
            return Err(Error::Parameter(format!(
                "arm {chosen} out of range for {} arms",
                self.w.len()
            )));
        }
        let p = self.distribution()?;
        for (a, w) in self.w.iter_mut().enumerate() {
            *w *= (self.eta * ix_estimate(a, chosen, p[a], self.gamma, reward)).exp();
        }
        let k = self.w.len() as f64;
        let share = self.alpha / k * self.w.iter().sum::<f64>();
        for w in &mut self.w {
            *w = (1.0 - self.alpha) * *w + share;
        }
        rescale_to_unit_mean(&mut self.w);
        if self.w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::StateCorruption(format!("agent weights {:?}", self.w)));
        }
        self.t += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-12;

    #[test]
    fn exp3ix_parameters() {
        let one = Exp3Ix::new(1).unwrap();
        assert!((one.eta() - 0.832_554_611).abs() < 1e-8);
        assert!((one.gamma() - 0.416_277_306).abs() < 1e-8);
        let hundred = Exp3Ix::new(100).unwrap();
        assert!((hundred.eta() - 0.083_255_461).abs() < 1e-8);
        assert_eq!(hundred.distribution().unwrap().q, [0.5, 0.5]);
        assert!(matches!(Exp3Ix::new(0), Err(Error::Parameter(_))));
    }

    #[test]
    fn exp3ix_distribution_is_weight_ratio() {
        let l = Exp3Ix::new(10).unwrap().with_weights([3.0, 1.0]).unwrap();
        assert_eq!(l.distribution().unwrap().q, [0.75, 0.25]);
        let e = std::f64::consts::E;
        let l = Exp3Ix::new(10).unwrap().with_weights([e, e]).unwrap();
        assert_eq!(l.distribution().unwrap().q, [0.5, 0.5]);
    }

    #[test]
    fn exp3ix_full_reward_keeps_distribution() {
        for chosen in Strategy::ALL {
            let mut l = Exp3Ix::new(100).unwrap().with_gamma(0.1);
            let est = l.update(chosen, 1.0).unwrap();
            assert_eq!(est, [1.0, 1.0]);
            assert_eq!(l.distribution().unwrap().q, [0.5, 0.5]);
        }
    }

    #[test]
    fn exp3ix_zero_reward_hand_trace() {
        let mut l = Exp3Ix::new(100).unwrap().with_gamma(0.1);
        let eta = l.eta();
        let est = l.update(Strategy::ExtComm, 0.0).unwrap();
        assert!((est[0] - (-2.0 / 3.0)).abs() < EPS);
        assert_eq!(est[1], 1.0);
        // exponents −0.4η and +0.6η
        let q_bsg = (0.6 * eta).exp() / ((0.6 * eta).exp() + (-0.4 * eta).exp());
        let q = l.distribution().unwrap().q;
        assert!((q[1] - q_bsg).abs() < EPS);
        assert!(q[1] > 0.5);
    }

    #[test]
    fn exp3ix_standard_mode_skips_normalization() {
        let mut l = Exp3Ix::new(100)
            .unwrap()
            .with_gamma(0.1)
            .with_mode(MetaUpdate::Standard);
        let eta = l.eta();
        l.update(Strategy::ExtComm, 0.0).unwrap();
        let q_bsg = eta.exp() / (eta.exp() + (-2.0 / 3.0 * eta).exp());
        assert!((l.distribution().unwrap().q[1] - q_bsg).abs() < EPS);
    }

    #[test]
    fn exp3ix_rejects_bad_reward() {
        let mut l = Exp3Ix::new(10).unwrap();
        assert!(matches!(
            l.update(Strategy::Bsg, 1.5),
            Err(Error::RewardRange(_))
        ));
        assert!(matches!(
            l.update(Strategy::Bsg, -0.1),
            Err(Error::RewardRange(_))
        ));
    }

    #[test]
    fn agent_learner_parameters() {
        let l = AgentLearner::new(2, 100).unwrap();
        assert!((l.eta() - 0.230_180_741).abs() < 1e-8);
        assert_eq!(l.gamma(), l.eta() / 2.0);
        assert_eq!(l.alpha(), 0.01);
        let l = AgentLearner::new(8, 55).unwrap();
        assert!(l.distribution().unwrap().iter().all(|&p| p == 0.125));
        assert!(AgentLearner::new(0, 10).is_err());
        assert!(AgentLearner::new(3, 0).is_err());
    }

    #[test]
    fn single_arm_learner_is_degenerate() {
        let mut l = AgentLearner::new(1, 50).unwrap();
        for r in [0.0, 0.3, 1.0, 0.0] {
            l.update(0, r).unwrap();
            assert_eq!(l.distribution().unwrap(), vec![1.0]);
        }
    }

    #[test]
    fn agent_full_reward_only_mixes_toward_uniform() {
        let mut l = AgentLearner::new(3, 10).unwrap();
        l.w = vec![4.0, 1.0, 1.0];
        let before = l.distribution().unwrap();
        l.update(1, 1.0).unwrap();
        let alpha = l.alpha();
        let after = l.distribution().unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert!((a - ((1.0 - alpha) * b + alpha / 3.0)).abs() < EPS);
        }
    }

    #[test]
    fn agent_distribution_has_share_floor() {
        let mut l = AgentLearner::new(4, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let p = l.distribution().unwrap();
            let a = sample_index(&p, &mut rng);
            l.update(a, if a == 0 { 1.0 } else { 0.0 }).unwrap();
            let p = l.distribution().unwrap();
            assert!(p.iter().all(|&x| x >= l.alpha() / 4.0 - EPS));
        }
    }

    #[test]
    fn bernoulli_bandit_concentrates_on_better_arm() {
        let horizon = 5000;
        let mut successes = 0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut l = AgentLearner::new(2, horizon).unwrap();
            for _ in 0..horizon {
                let a = sample_index(&l.distribution().unwrap(), &mut rng);
                let mean = if a == 0 { 0.8 } else { 0.2 };
                let r = if rng.random::<f64>() < mean { 1.0 } else { 0.0 };
                l.update(a, r).unwrap();
            }
            if l.distribution().unwrap()[0] > 0.9 {
                successes += 1;
            }
        }
        assert!(successes >= 45, "{successes}/50 runs concentrated");
    }

    #[test]
    fn weights_survive_long_adversarial_runs() {
        let mut meta = Exp3Ix::new(100_000).unwrap();
        let mut agent = AgentLearner::new(5, 100_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in 0..100_000u32 {
            // reward the arm the learner is least likely to pick
            let q = meta.distribution().unwrap();
            let s = q.sample(&mut rng);
            let r = if q.get(s) < 0.5 { 1.0 } else { 0.0 };
            meta.update(s, r).unwrap();
            let p = agent.distribution().unwrap();
            let a = sample_index(&p, &mut rng);
            let r = if t % 7 == 0 { 1.0 } else { 1.0 - p[a] };
            agent.update(a, r.clamp(0.0, 1.0)).unwrap();
        }
        assert!(meta.weights().iter().all(|w| w.is_finite() && *w > 0.0));
        assert!(agent.weights().iter().all(|w| w.is_finite() && *w > 0.0));
    }

    #[test]
    fn sample_index_respects_point_masses() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(sample_index(&[1.0, 0.0], &mut rng), 0);
            assert_eq!(sample_index(&[0.0, 1.0], &mut rng), 1);
        }
    }

    proptest! {
        #[test]
        fn distributions_stay_valid(
            rewards in proptest::collection::vec((0.0f64..=1.0, 0usize..6), 1..400),
            paper in any::<bool>(),
        ) {
            let mode = if paper { MetaUpdate::Paper } else { MetaUpdate::Standard };
            let mut meta = Exp3Ix::new(rewards.len()).unwrap().with_mode(mode);
            let mut agent = AgentLearner::new(6, rewards.len()).unwrap();
            for &(r, a) in &rewards {
                let s = Strategy::ALL[a % 2];
                let est = meta.update(s, r).unwrap();
                prop_assert_eq!(est[1 - s.index()], 1.0);
                prop_assert!(est[s.index()] <= 1.0);
                let q = meta.distribution().unwrap().q;
                prop_assert!((q[0] + q[1] - 1.0).abs() <= EPS);
                prop_assert!(q.iter().all(|&x| x >= 0.0));
                agent.update(a, r).unwrap();
                let p = agent.distribution().unwrap();
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= EPS);
                prop_assert!(p.iter().all(|&x| x >= 0.0));
            }
        }

        #[test]
        fn updates_are_deterministic(rewards in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
            let run = || {
                let mut meta = Exp3Ix::new(200).unwrap();
                let mut agent = AgentLearner::new(3, 200).unwrap();
                for (i, &r) in rewards.iter().enumerate() {
                    meta.update(Strategy::ALL[i % 2], r).unwrap();
                    agent.update(i % 3, r).unwrap();
                }
                (meta, agent)
            };
            prop_assert_eq!(run(), run());
        }
    }
}
