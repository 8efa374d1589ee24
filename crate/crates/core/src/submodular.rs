//! Set functions over partial joint actions.
//!
//! The ground set is the disjoint union of the agents' action sets, and a
//! "set" is modelled as a partial assignment: every agent contributes at most
//! one action. Objectives are time-indexed (`f_t`) and are expected to be
//! normalized, non-decreasing and submodular over these partial assignments;
//! [`verify_definition1`] checks that claim exhaustively on small instances.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Absolute tolerance used by every property check on normalized values.
pub const TOLERANCE: f64 = 1e-9;

/// Upper limit on `(A, B)` pairs that the exhaustive verifier will visit.
pub const VERIFY_BUDGET: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One element of the ground set: action `index` of agent `agent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId {
    pub agent: AgentId,
    pub index: usize,
}

impl ActionId {
    pub fn new(agent: usize, index: usize) -> Self {
        Self {
            agent: AgentId(agent),
            index,
        }
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}:{})", self.agent, self.index)
    }
}

/// A possibly partial assignment of actions to agents.
///
/// At most one action per agent is representable, which is exactly the
/// partition constraint of the coordination problem.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointAction(BTreeMap<AgentId, usize>);

impl JointAction {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Complete joint action where agent `i` plays `indices[i]`.
    pub fn from_indices(indices: &[usize]) -> Self {
        Self(
            indices
                .iter()
                .enumerate()
                .map(|(i, &a)| (AgentId(i), a))
                .collect(),
        )
    }

    pub fn get(&self, agent: AgentId) -> Option<usize> {
        self.0.get(&agent).copied()
    }

    pub fn contains(&self, action: ActionId) -> bool {
        self.get(action.agent) == Some(action.index)
    }

    pub fn insert(&mut self, action: ActionId) -> Result<()> {
        if self.0.contains_key(&action.agent) {
            return Err(Error::AgentAlreadyAssigned {
                agent: action.agent.0,
            });
        }
        self.0.insert(action.agent, action.index);
        Ok(())
    }

    /// `self ∪ {action}` as a new value.
    pub fn with(&self, action: ActionId) -> Result<Self> {
        let mut next = self.clone();
        next.insert(action)?;
        Ok(next)
    }

    pub fn remove(&mut self, agent: AgentId) -> Option<usize> {
        self.0.remove(&agent)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_subset_of(&self, other: &JointAction) -> bool {
        self.iter().all(|a| other.contains(a))
    }

    pub fn iter(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.0.iter().map(|(&agent, &index)| ActionId { agent, index })
    }

    /// Action indices for agents `0..n`, if every one of them is assigned.
    pub fn to_indices(&self, n: usize) -> Option<Vec<usize>> {
        (0..n).map(|i| self.get(AgentId(i))).collect()
    }

    /// Number of agents whose action differs between the two assignments.
    pub fn shifts_to(&self, other: &JointAction) -> usize {
        let agents: std::collections::BTreeSet<AgentId> =
            self.0.keys().chain(other.0.keys()).copied().collect();
        agents
            .into_iter()
            .filter(|&a| self.get(a) != other.get(a))
            .count()
    }
}

impl fmt::Display for JointAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, a) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", a.agent, a.index)?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<ActionId> for JointAction {
    /// Later actions for an already-present agent overwrite earlier ones.
    fn from_iter<I: IntoIterator<Item = ActionId>>(iter: I) -> Self {
        Self(iter.into_iter().map(|a| (a.agent, a.index)).collect())
    }
}

/// A time-indexed set function `f_t` over partial joint actions.
pub trait SetFunction {
    /// `|V_i|` for every agent, in agent order.
    fn action_counts(&self) -> &[usize];

    fn horizon(&self) -> usize;

    /// Upper bound on any per-step value.
    fn upper_bound(&self) -> f64 {
        1.0
    }

    fn value(&self, t: usize, set: &JointAction) -> Result<f64>;

    fn num_agents(&self) -> usize {
        self.action_counts().len()
    }
}

impl<F: SetFunction + ?Sized> SetFunction for &F {
    fn action_counts(&self) -> &[usize] {
        (**self).action_counts()
    }
    fn horizon(&self) -> usize {
        (**self).horizon()
    }
    fn upper_bound(&self) -> f64 {
        (**self).upper_bound()
    }
    fn value(&self, t: usize, set: &JointAction) -> Result<f64> {
        (**self).value(t, set)
    }
}

impl<F: SetFunction + ?Sized> SetFunction for Arc<F> {
    fn action_counts(&self) -> &[usize] {
        (**self).action_counts()
    }
    fn horizon(&self) -> usize {
        (**self).horizon()
    }
    fn upper_bound(&self) -> f64 {
        (**self).upper_bound()
    }
    fn value(&self, t: usize, set: &JointAction) -> Result<f64> {
        (**self).value(t, set)
    }
}

/// Adapts a closure into a [`SetFunction`].
#[derive(Clone)]
pub struct FnSetFunction<G> {
    counts: Vec<usize>,
    horizon: usize,
    upper: f64,
    eval: G,
}

impl<G> FnSetFunction<G>
where
    G: Fn(usize, &JointAction) -> f64,
{
    pub fn new(counts: Vec<usize>, horizon: usize, upper: f64, eval: G) -> Self {
        Self {
            counts,
            horizon,
            upper,
            eval,
        }
    }
}

impl<G> SetFunction for FnSetFunction<G>
where
    G: Fn(usize, &JointAction) -> f64,
{
    fn action_counts(&self) -> &[usize] {
        &self.counts
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn upper_bound(&self) -> f64 {
        self.upper
    }
    fn value(&self, t: usize, set: &JointAction) -> Result<f64> {
        Ok((self.eval)(t, set))
    }
}

/// `f_t(a | base) = f_t(base ∪ {a}) − f_t(base)`.
pub fn marginal_gain<F: SetFunction + ?Sized>(
    f: &F,
    t: usize,
    action: ActionId,
    base: &JointAction,
) -> Result<f64> {
    let grown = base.with(action)?;
    Ok(f.value(t, &grown)? - f.value(t, base)?)
}

/// Rescales a raw objective into `[0, 1]` with `g(t, ∅) = 0`.
#[derive(Clone, Debug)]
pub struct Normalized<F> {
    raw: F,
    range: f64,
}

/// `g(t, A) = (raw(t, A) − raw(t, ∅)) / range`.
///
/// Values outside `[raw(t, ∅), raw(t, ∅) + range]` are reported as
/// [`Error::OutOfBounds`] rather than clipped.
pub fn normalize<F: SetFunction>(raw: F, range: f64) -> Result<Normalized<F>> {
    if !(range.is_finite() && range > 0.0) {
        return Err(Error::Parameter(format!(
            "normalization range must be positive and finite, got {range}"
        )));
    }
    Ok(Normalized { raw, range })
}

impl<F> Normalized<F> {
    pub fn raw(&self) -> &F {
        &self.raw
    }

    pub fn range(&self) -> f64 {
        self.range
    }
}

impl<F: SetFunction> SetFunction for Normalized<F> {
    fn action_counts(&self) -> &[usize] {
        self.raw.action_counts()
    }
    fn horizon(&self) -> usize {
        self.raw.horizon()
    }
    fn value(&self, t: usize, set: &JointAction) -> Result<f64> {
        let base = self.raw.value(t, &JointAction::empty())?;
        if set.is_empty() {
            return Ok(0.0);
        }
        let raw = self.raw.value(t, set)?;
        let upper = base + self.range;
        let slack = TOLERANCE * self.range.max(1.0);
        if !raw.is_finite() || raw < base - slack || raw > upper + slack {
            return Err(Error::OutOfBounds {
                t,
                set: set.clone(),
                raw,
                lower: base,
                upper,
            });
        }
        Ok(((raw - base) / self.range).clamp(0.0, 1.0))
    }
}

/// Records which subsets were queried during one step and refuses anything
/// that is not a subset of the executed joint action.
#[derive(Clone, Debug)]
pub struct FeedbackGate {
    t: usize,
    executed: JointAction,
    queries: Vec<JointAction>,
}

impl FeedbackGate {
    pub fn new(t: usize, executed: JointAction) -> Self {
        Self {
            t,
            executed,
            queries: Vec::new(),
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn executed(&self) -> &JointAction {
        &self.executed
    }

    pub fn query_log(&self) -> &[JointAction] {
        &self.queries
    }

    /// Number of non-empty subsets queried; `f_t(∅) = 0` never needs a query.
    pub fn evaluations(&self) -> usize {
        self.queries.iter().filter(|q| !q.is_empty()).count()
    }

    pub fn evaluate<F: SetFunction + ?Sized>(&mut self, f: &F, set: &JointAction) -> Result<f64> {
        if !set.is_subset_of(&self.executed) {
            return Err(Error::FeedbackViolation {
                t: self.t,
                queried: set.clone(),
                executed: self.executed.clone(),
            });
        }
        self.queries.push(set.clone());
        if set.is_empty() {
            return Ok(0.0);
        }
        f.value(self.t, set)
    }
}

/// Outcome of [`verify_definition1`].
#[derive(Clone, Debug, PartialEq)]
pub enum Verification {
    Pass,
    Counterexample(Violation),
}

impl Verification {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verification::Pass)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NotNormalized {
        value: f64,
    },
    NotMonotone {
        subset: JointAction,
        superset: JointAction,
        subset_value: f64,
        superset_value: f64,
    },
    NotSubmodular {
        element: ActionId,
        subset: JointAction,
        superset: JointAction,
        subset_gain: f64,
        superset_gain: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotNormalized { value } => write!(f, "f(∅) = {value} ≠ 0"),
            Violation::NotMonotone {
                subset,
                superset,
                subset_value,
                superset_value,
            } => write!(
                f,
                "monotonicity: f({subset}) = {subset_value} > f({superset}) = {superset_value}"
            ),
            Violation::NotSubmodular {
                element,
                subset,
                superset,
                subset_gain,
                superset_gain,
            } => write!(
                f,
                "diminishing returns: f({element} | {subset}) = {subset_gain} < f({element} | {superset}) = {superset_gain}"
            ),
        }
    }
}

/// Mixed-radix index over partial assignments: digit 0 means "unassigned",
/// digit `d > 0` means action `d − 1`.
struct PartialSpace {
    radix: Vec<usize>,
}

impl PartialSpace {
    fn size(&self) -> usize {
        self.radix.iter().product()
    }

    fn decode(&self, mut code: usize) -> Vec<usize> {
        self.radix
            .iter()
            .map(|&r| {
                let d = code % r;
                code /= r;
                d
            })
            .collect()
    }

    fn encode(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.radix)
            .rev()
            .fold(0, |acc, (&d, &r)| acc * r + d)
    }

    fn joint(digits: &[usize]) -> JointAction {
        digits
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(i, &d)| ActionId::new(i, d - 1))
            .collect()
    }
}

/// Exhaustively checks normalization, monotonicity and diminishing returns
/// of `f_t` over every pair of nested partial joint actions.
///
/// Refuses with [`Error::EnumerationBudget`] when the number of nested pairs
/// exceeds [`VERIFY_BUDGET`]; it never falls back to sampling.
pub fn verify_definition1<F: SetFunction + ?Sized>(f: &F, t: usize) -> Result<Verification> {
    let counts = f.action_counts();
    let pairs: u128 = counts.iter().map(|&c| 1 + 2 * c as u128).product();
    if pairs > VERIFY_BUDGET {
        return Err(Error::EnumerationBudget {
            required: pairs,
            budget: VERIFY_BUDGET,
        });
    }
    let space = PartialSpace {
        radix: counts.iter().map(|&c| c + 1).collect(),
    };
    let values = (0..space.size())
        .map(|code| f.value(t, &PartialSpace::joint(&space.decode(code))))
        .collect::<Result<Vec<f64>>>()?;

    if values[0].abs() > TOLERANCE {
        return Ok(Verification::Counterexample(Violation::NotNormalized {
            value: values[0],
        }));
    }

    for b_code in 0..space.size() {
        let b = space.decode(b_code);
        let assigned: Vec<usize> = (0..b.len()).filter(|&i| b[i] > 0).collect();
        let free: Vec<usize> = (0..b.len()).filter(|&i| b[i] == 0).collect();
        for mask in 0u64..(1u64 << assigned.len()) {
            let mut a = vec![0; b.len()];
            for (bit, &agent) in assigned.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    a[agent] = b[agent];
                }
            }
            let a_code = space.encode(&a);
            let (fa, fb) = (values[a_code], values[b_code]);
            if fa > fb + TOLERANCE {
                return Ok(Verification::Counterexample(Violation::NotMonotone {
                    subset: PartialSpace::joint(&a),
                    superset: PartialSpace::joint(&b),
                    subset_value: fa,
                    superset_value: fb,
                }));
            }
            for &agent in &free {
                for action in 0..counts[agent] {
                    let mut a_s = a.clone();
                    a_s[agent] = action + 1;
                    let mut b_s = b.clone();
                    b_s[agent] = action + 1;
                    let gain_a = values[space.encode(&a_s)] - fa;
                    let gain_b = values[space.encode(&b_s)] - fb;
                    if gain_a + TOLERANCE < gain_b {
                        return Ok(Verification::Counterexample(Violation::NotSubmodular {
                            element: ActionId::new(agent, action),
                            subset: PartialSpace::joint(&a),
                            superset: PartialSpace::joint(&b),
                            subset_gain: gain_a,
                            superset_gain: gain_b,
                        }));
                    }
                }
            }
        }
    }
    Ok(Verification::Pass)
}

/// Static weighted coverage: each action covers a subset of at most 64
/// weighted elements, and the value of a set is the covered weight divided
/// by the total weight.
#[derive(Clone, Debug)]
pub struct WeightedCoverage {
    counts: Vec<usize>,
    covers: Vec<Vec<u64>>,
    weights: Vec<f64>,
    horizon: usize,
}

impl WeightedCoverage {
    pub fn new(covers: Vec<Vec<u64>>, weights: Vec<f64>, horizon: usize) -> Result<Self> {
        if weights.is_empty() || weights.len() > 64 {
            return Err(Error::Parameter(
                "coverage needs between 1 and 64 elements".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Parameter("coverage weights must be non-negative".into()));
        }
        if covers.iter().any(|c| c.is_empty()) {
            return Err(Error::Parameter("every agent needs at least one action".into()));
        }
        Ok(Self {
            counts: covers.iter().map(Vec::len).collect(),
            covers,
            weights,
            horizon,
        })
    }

    /// Random instance with `agents` agents, between 1 and `max_actions`
    /// actions each, and `elements` elements with weights in `(0, 1]`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        agents: usize,
        max_actions: usize,
        elements: usize,
    ) -> Self {
        let elements = elements.clamp(1, 64);
        let weights = (0..elements).map(|_| 1.0 - rng.random::<f64>()).collect();
        let mask = if elements == 64 {
            u64::MAX
        } else {
            (1u64 << elements) - 1
        };
        let covers = (0..agents)
            .map(|_| {
                let k = rng.random_range(1..=max_actions.max(1));
                (0..k).map(|_| rng.random::<u64>() & mask).collect()
            })
            .collect();
        Self::new(covers, weights, 1).expect("random coverage is well formed")
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    fn covered(&self, set: &JointAction) -> u64 {
        set.iter()
            .fold(0, |acc, a| acc | self.covers[a.agent.0][a.index])
    }
}

impl SetFunction for WeightedCoverage {
    fn action_counts(&self) -> &[usize] {
        &self.counts
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn value(&self, _t: usize, set: &JointAction) -> Result<f64> {
        for a in set.iter() {
            if a.agent.0 >= self.counts.len() || a.index >= self.counts[a.agent.0] {
                return Err(Error::UnknownAction { action: a });
            }
        }
        let total: f64 = self.weights.iter().sum();
        if total == 0.0 {
            return Ok(0.0);
        }
        let covered = self.covered(set);
        let hit: f64 = self
            .weights
            .iter()
            .enumerate()
            .filter(|(e, _)| covered & (1 << e) != 0)
            .map(|(_, w)| w)
            .sum();
        Ok(hit / total)
    }
}

/// `f(A) = (|A| / n)²`: normalized and monotone but supermodular.
#[derive(Clone, Debug)]
pub struct SquaredCardinality {
    counts: Vec<usize>,
}

impl SquaredCardinality {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }
}

impl SetFunction for SquaredCardinality {
    fn action_counts(&self) -> &[usize] {
        &self.counts
    }
    fn horizon(&self) -> usize {
        1
    }
    fn value(&self, _t: usize, set: &JointAction) -> Result<f64> {
        let n = self.counts.len().max(1) as f64;
        Ok((set.len() as f64 / n).powi(2))
    }
}
