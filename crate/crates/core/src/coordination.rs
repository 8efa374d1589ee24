//! Coordinators: offline Sequential Greedy, BSG, MetaBSG and plain
//! command following.
//!
//! A step always follows the same shape: pick a complete joint action,
//! execute it in the [`Environment`], then walk the agents in order and let
//! agent `i` observe `f_t(A_i)` for its prefix set `A_i` through a
//! [`FeedbackGate`]. The reward of agent `i` is the marginal gain
//! `f_t(A_i) − f_t(A_{i−1})`, so the rewards of a step telescope to
//! `f_t(executed)`.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{
    sample_index, AgentLearner, Exp3Ix, MetaUpdate, Strategy, StrategyDistribution,
};
use crate::rng;
use crate::submodular::{marginal_gain, ActionId, AgentId, FeedbackGate, JointAction, SetFunction, TOLERANCE};

/// Source of the (untrusted) commanded joint action at each step.
pub trait CommandSource<Obs: ?Sized> {
    /// Must return one valid action for every agent.
    fn command(&mut self, t: usize, observation: &Obs) -> Result<JointAction>;
}

/// Commands produced by a closure of the time step.
pub struct FnCommand<G>(pub G);

impl<G, Obs: ?Sized> CommandSource<Obs> for FnCommand<G>
where
    G: FnMut(usize) -> JointAction,
{
    fn command(&mut self, t: usize, _observation: &Obs) -> Result<JointAction> {
        Ok((self.0)(t))
    }
}

/// The world the agents act in.
///
/// Per step the driver calls [`command`](Environment::command) and/or
/// [`preview`](Environment::preview) as the algorithm requires, then exactly
/// one [`execute`](Environment::execute), whose returned objective is the
/// realized `f_t`.
pub trait Environment {
    type Objective: SetFunction;

    fn action_counts(&self) -> &[usize];

    fn horizon(&self) -> usize;

    fn command(&mut self, t: usize) -> Result<JointAction>;

    /// Full-information objective before acting; only the SG benchmark uses it.
    fn preview(&mut self, t: usize) -> Result<Self::Objective>;

    fn execute(&mut self, t: usize, executed: &JointAction) -> Result<Self::Objective>;

    /// Task-level metric after the last executed step, if any.
    fn metric(&self) -> Option<f64> {
        None
    }
}

/// Environment around a fixed time-indexed set function.
pub struct StaticEnvironment<F, C> {
    f: Arc<F>,
    commands: C,
    counts: Vec<usize>,
}

impl<F: SetFunction, C: CommandSource<()>> StaticEnvironment<F, C> {
    pub fn new(f: F, commands: C) -> Self {
        let counts = f.action_counts().to_vec();
        Self {
            f: Arc::new(f),
            commands,
            counts,
        }
    }

    pub fn function(&self) -> &Arc<F> {
        &self.f
    }
}

impl<F: SetFunction, C: CommandSource<()>> Environment for StaticEnvironment<F, C> {
    type Objective = Arc<F>;

    fn action_counts(&self) -> &[usize] {
        &self.counts
    }

    fn horizon(&self) -> usize {
        self.f.horizon()
    }

    fn command(&mut self, t: usize) -> Result<JointAction> {
        self.commands.command(t, &())
    }

    fn preview(&mut self, _t: usize) -> Result<Arc<F>> {
        Ok(Arc::clone(&self.f))
    }

    fn execute(&mut self, _t: usize, _executed: &JointAction) -> Result<Arc<F>> {
        Ok(Arc::clone(&self.f))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "MetaBSG")]
    MetaBsg,
    #[serde(rename = "BSG")]
    Bsg,
    CommandOnly,
    #[serde(rename = "SG-oracle")]
    Sg,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::MetaBsg => "MetaBSG",
            Algorithm::Bsg => "BSG",
            Algorithm::CommandOnly => "CommandOnly",
            Algorithm::Sg => "SG-oracle",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MetaBSG" => Ok(Algorithm::MetaBsg),
            "BSG" => Ok(Algorithm::Bsg),
            "CommandOnly" => Ok(Algorithm::CommandOnly),
            "SG-oracle" | "SG" => Ok(Algorithm::Sg),
            other => Err(Error::Parameter(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordinatorConfig {
    pub seed: u64,
    /// Sequential order of the agents; `None` means ascending agent index.
    pub ordering: Option<Vec<usize>>,
    pub meta_update: MetaUpdate,
    /// Multiplier on the agent learners' default learning rate.
    pub agent_eta_scale: f64,
    /// Forces MetaBSG to follow one strategy; the meta-learner still updates.
    pub pin_strategy: Option<Strategy>,
}

impl Default for CoordinatorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            ordering: None,
            meta_update: MetaUpdate::Paper,
            agent_eta_scale: 1.0,
            pin_strategy: None,
        }
    }
}

impl CoordinatorConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Everything that happened at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub bsg_draw: Option<JointAction>,
    pub command: Option<JointAction>,
    pub strategy: Option<Strategy>,
    pub executed: JointAction,
    /// Marginal gain of each agent's executed action along the prefix chain,
    /// indexed by agent id.
    pub rewards: Vec<f64>,
    /// `f_t(executed)`.
    pub value: f64,
    pub q: Option<StrategyDistribution>,
    /// Agent learners' distributions used for this step's draw.
    pub p: Vec<Vec<f64>>,
    /// Gated evaluations performed by each agent, indexed by agent id.
    pub evaluations: Vec<usize>,
    pub query_log: Vec<JointAction>,
    pub meta_updates: usize,
    pub metric: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub algorithm: Algorithm,
    pub config: CoordinatorConfig,
    pub steps: Vec<StepRecord>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.value).collect()
    }

    pub fn total_value(&self) -> f64 {
        self.steps.iter().map(|s| s.value).sum()
    }

    /// Total gated evaluations per agent over the episode.
    pub fn evaluations_per_agent(&self) -> Vec<usize> {
        let n = self.steps.first().map_or(0, |s| s.evaluations.len());
        let mut out = vec![0; n];
        for s in &self.steps {
            for (o, e) in out.iter_mut().zip(&s.evaluations) {
                *o += e;
            }
        }
        out
    }
}

/// Offline Sequential Greedy with full access to `f_t`.
///
/// Agents choose in `ordering`, each maximizing its marginal gain given its
/// predecessors; ties go to the lowest action index.
pub fn sequential_greedy<F: SetFunction + ?Sized>(
    f: &F,
    t: usize,
    ordering: &[usize],
) -> Result<JointAction> {
    let counts = f.action_counts();
    let mut chosen = JointAction::empty();
    for &agent in ordering {
        let k = *counts
            .get(agent)
            .ok_or_else(|| Error::Parameter(format!("agent {agent} not in the objective")))?;
        if k == 0 {
            return Err(Error::Parameter(format!("agent {agent} has no actions")));
        }
        let mut best = (0, f64::NEG_INFINITY);
        for index in 0..k {
            let gain = marginal_gain(f, t, ActionId::new(agent, index), &chosen)?;
            if gain > best.1 {
                best = (index, gain);
            }
        }
        chosen.insert(ActionId::new(agent, best.0))?;
    }
    Ok(chosen)
}

fn validate_complete(action: &JointAction, counts: &[usize], what: &str) -> Result<()> {
    if action.len() != counts.len() {
        return Err(Error::Parameter(format!(
            "{what} {action} must assign all {} agents",
            counts.len()
        )));
    }
    for a in action.iter() {
        if a.agent.0 >= counts.len() || a.index >= counts[a.agent.0] {
            return Err(Error::UnknownAction { action: a });
        }
    }
    Ok(())
}

fn validate_ordering(ordering: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in ordering {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Parameter(format!(
                "ordering {ordering:?} is not a permutation of 0..{n}"
            )));
        }
    }
    if ordering.len() != n {
        return Err(Error::Parameter(format!(
            "ordering {ordering:?} is not a permutation of 0..{n}"
        )));
    }
    Ok(())
}

/// Prefix-chain feedback: agent `i` (in order) observes `f_t(A_i)` and is
/// credited `f_t(A_i) − f_t(A_{i−1})`.
struct ChainFeedback {
    rewards: Vec<f64>,
    value: f64,
    evaluations: Vec<usize>,
    query_log: Vec<JointAction>,
}

fn chain_feedback<F: SetFunction + ?Sized>(
    f: &F,
    t: usize,
    executed: &JointAction,
    order: &[usize],
) -> Result<ChainFeedback> {
    let n = order.len();
    let mut gate = FeedbackGate::new(t, executed.clone());
    let mut rewards = vec![0.0; n];
    let mut evaluations = vec![0; n];
    let mut prefix = JointAction::empty();
    let mut previous = 0.0;
    for &agent in order {
        let index = executed
            .get(AgentId(agent))
            .ok_or_else(|| Error::Parameter(format!("agent {agent} has no executed action")))?;
        prefix.insert(ActionId::new(agent, index))?;
        let value = gate.evaluate(f, &prefix)?;
        evaluations[agent] += 1;
        rewards[agent] = value - previous;
        previous = value;
    }
    Ok(ChainFeedback {
        rewards,
        value: previous,
        evaluations,
        query_log: gate.query_log().to_vec(),
    })
}

/// Maps a reward that should lie in `[0, 1]` onto it, absorbing rounding.
fn learner_reward(r: f64) -> Result<f64> {
    if !(-TOLERANCE..=1.0 + TOLERANCE).contains(&r) || !r.is_finite() {
        return Err(Error::RewardRange(r));
    }
    Ok(r.clamp(0.0, 1.0))
}

/// Stateful driver for one episode of one algorithm.
pub struct Coordinator {
    algorithm: Algorithm,
    config: CoordinatorConfig,
    counts: Vec<usize>,
    order: Vec<usize>,
    agents: Vec<AgentLearner>,
    agent_rngs: Vec<ChaCha8Rng>,
    meta: Option<Exp3Ix>,
    meta_rng: ChaCha8Rng,
}

impl Coordinator {
    pub fn new(
        algorithm: Algorithm,
        counts: &[usize],
        horizon: usize,
        config: CoordinatorConfig,
    ) -> Result<Self> {
        let n = counts.len();
        let order = config.ordering.clone().unwrap_or_else(|| (0..n).collect());
        validate_ordering(&order, n)?;
        if let Some(i) = counts.iter().position(|&k| k == 0) {
            return Err(Error::Parameter(format!("agent {i} has an empty action set")));
        }
        let learns = matches!(algorithm, Algorithm::Bsg | Algorithm::MetaBsg);
        let agents = if learns && horizon > 0 {
            counts
                .iter()
                .map(|&k| AgentLearner::with_eta_scale(k, horizon, config.agent_eta_scale))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let meta = if algorithm == Algorithm::MetaBsg && horizon > 0 {
            Some(Exp3Ix::new(horizon)?.with_mode(config.meta_update))
        } else {
            None
        };
        Ok(Self {
            algorithm,
            agent_rngs: (0..n).map(|i| rng::agent_stream(config.seed, i)).collect(),
            meta_rng: rng::stream(config.seed, rng::META_STREAM),
            config,
            counts: counts.to_vec(),
            order,
            agents,
            meta,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn agent_learners(&self) -> &[AgentLearner] {
        &self.agents
    }

    pub fn meta_learner(&self) -> Option<&Exp3Ix> {
        self.meta.as_ref()
    }

    pub fn ordering(&self) -> &[usize] {
        &self.order
    }

    /// Each agent draws its candidate action from its own learner.
    fn draw_bsg(&mut self) -> Result<(JointAction, Vec<Vec<f64>>)> {
        let mut draw = JointAction::empty();
        let mut snapshots = Vec::with_capacity(self.agents.len());
        for (i, (learner, rng)) in self.agents.iter().zip(&mut self.agent_rngs).enumerate() {
            let p = learner.distribution()?;
            draw.insert(ActionId::new(i, sample_index(&p, rng)))?;
            snapshots.push(p);
        }
        Ok((draw, snapshots))
    }

    fn update_agents(&mut self, executed: &JointAction, rewards: &[f64]) -> Result<()> {
        for (i, learner) in self.agents.iter_mut().enumerate() {
            let chosen = executed
                .get(AgentId(i))
                .ok_or_else(|| Error::Parameter(format!("agent {i} has no executed action")))?;
            learner.update(chosen, learner_reward(rewards[i])?)?;
        }
        Ok(())
    }

    /// One step of the configured algorithm.
    pub fn step<E: Environment>(&mut self, env: &mut E, t: usize) -> Result<StepRecord> {
        self.step_with(env, t, |_, _| {})
    }

    /// As [`Coordinator::step`], handing the realized objective to `observe`.
    pub fn step_with<E: Environment>(
        &mut self,
        env: &mut E,
        t: usize,
        observe: impl FnOnce(&StepRecord, &E::Objective),
    ) -> Result<StepRecord> {
        let (record, objective) = match self.algorithm {
            Algorithm::Bsg => self.bsg_step(env, t)?,
            Algorithm::MetaBsg => self.metabsg_step(env, t)?,
            Algorithm::CommandOnly => self.command_step(env, t)?,
            Algorithm::Sg => self.sg_step(env, t)?,
        };
        observe(&record, &objective);
        Ok(record)
    }

    fn finish<F: SetFunction>(
        &self,
        t: usize,
        f: &F,
        executed: JointAction,
        metric: Option<f64>,
    ) -> Result<(StepRecord, ChainFeedback)> {
        let fb = chain_feedback(f, t, &executed, &self.order)?;
        let record = StepRecord {
            t,
            bsg_draw: None,
            command: None,
            strategy: None,
            executed,
            rewards: fb.rewards.clone(),
            value: fb.value,
            q: None,
            p: Vec::new(),
            evaluations: fb.evaluations.clone(),
            query_log: fb.query_log.clone(),
            meta_updates: 0,
            metric,
        };
        Ok((record, fb))
    }

    /// Draw from the agent learners, execute, learn from the prefix chain.
    pub fn bsg_step<E: Environment>(&mut self, env: &mut E, t: usize) -> Result<(StepRecord, E::Objective)> {
        let (draw, p) = self.draw_bsg()?;
        let f = env.execute(t, &draw)?;
        let (mut record, fb) = self.finish(t, &f, draw.clone(), env.metric())?;
        self.update_agents(&draw, &fb.rewards)?;
        record.bsg_draw = Some(draw);
        record.p = p;
        Ok((record, f))
    }

    /// Draw BSG candidates and a strategy, execute the selected joint
    /// action, then update the agent learners with the executed actions'
    /// marginal gains and the meta-learner with `f_t(executed)`.
    pub fn metabsg_step<E: Environment>(&mut self, env: &mut E, t: usize) -> Result<(StepRecord, E::Objective)> {
        let (draw, p) = self.draw_bsg()?;
        let command = env.command(t)?;
        validate_complete(&command, &self.counts, "command")?;
        let meta = self
            .meta
            .as_mut()
            .ok_or_else(|| Error::Parameter("MetaBSG needs a meta-learner".into()))?;
        let q = meta.distribution()?;
        let drawn = q.sample(&mut self.meta_rng);
        let strategy = self.config.pin_strategy.unwrap_or(drawn);
        let executed = match strategy {
            Strategy::ExtComm => command.clone(),
            Strategy::Bsg => draw.clone(),
        };
        let f = env.execute(t, &executed)?;
        let (mut record, fb) = self.finish(t, &f, executed.clone(), env.metric())?;
        self.update_agents(&executed, &fb.rewards)?;
        let meta = self.meta.as_mut().expect("checked above");
        meta.update(strategy, learner_reward(fb.value)?)?;
        record.bsg_draw = Some(draw);
        record.command = Some(command);
        record.strategy = Some(strategy);
        record.q = Some(q);
        record.p = p;
        record.meta_updates = 1;
        Ok((record, f))
    }

    fn command_step<E: Environment>(&mut self, env: &mut E, t: usize) -> Result<(StepRecord, E::Objective)> {
        let command = env.command(t)?;
        validate_complete(&command, &self.counts, "command")?;
        let f = env.execute(t, &command)?;
        let (mut record, _) = self.finish(t, &f, command.clone(), env.metric())?;
        record.command = Some(command);
        Ok((record, f))
    }

    fn sg_step<E: Environment>(&mut self, env: &mut E, t: usize) -> Result<(StepRecord, E::Objective)> {
        let preview = env.preview(t)?;
        let choice = sequential_greedy(&preview, t, &self.order)?;
        let f = env.execute(t, &choice)?;
        let (record, _) = self.finish(t, &f, choice, env.metric())?;
        Ok((record, f))
    }
}

/// Runs `algorithm` for the environment's full horizon.
pub fn run_episode<E: Environment>(
    algorithm: Algorithm,
    env: &mut E,
    config: CoordinatorConfig,
) -> Result<EpisodeTrace> {
    run_episode_with(algorithm, env, config, |_, _| {})
}

/// As [`run_episode`], calling `observe` with every record and its realized
/// objective.
pub fn run_episode_with<E: Environment>(
    algorithm: Algorithm,
    env: &mut E,
    config: CoordinatorConfig,
    mut observe: impl FnMut(&StepRecord, &E::Objective),
) -> Result<EpisodeTrace> {
    let horizon = env.horizon();
    let counts = env.action_counts().to_vec();
    let mut coordinator = Coordinator::new(algorithm, &counts, horizon, config.clone())?;
    let mut steps = Vec::with_capacity(horizon);
    for t in 0..horizon {
        steps.push(coordinator.step_with(env, t, &mut observe)?);
    }
    Ok(EpisodeTrace {
        algorithm,
        config,
        steps,
    })
}
