//! Hindsight-optimal baseline and regret analytics.
//!
//! The coordination problem does not couple actions across steps, so the
//! optimal action sequence in hindsight is simply the per-step maximizer of
//! every `f_t`, found by enumerating the full product of action sets.

use rayon::prelude::*;
use serde::Serialize;

use crate::coordination::EpisodeTrace;
use crate::error::{Error, Result};
use crate::submodular::{JointAction, SetFunction, TOLERANCE};

/// Largest per-step product space the oracle enumerates.
pub const ORACLE_BUDGET: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct HindsightSolution {
    /// Lexicographically first maximizer per step.
    pub optimal: Vec<JointAction>,
    pub values: Vec<f64>,
    pub total: f64,
    /// All maximizers within tolerance per step, lexicographic order.
    pub ties: Vec<Vec<JointAction>>,
}

impl HindsightSolution {
    pub fn len(&self) -> usize {
        self.optimal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.optimal.is_empty()
    }

    /// Assembles a solution from per-step [`best_joint_action`] results.
    pub fn from_steps(steps: impl IntoIterator<Item = (JointAction, f64, Vec<JointAction>)>) -> Self {
        let mut solution = HindsightSolution {
            optimal: Vec::new(),
            values: Vec::new(),
            total: 0.0,
            ties: Vec::new(),
        };
        for (a, v, ties) in steps {
            solution.optimal.push(a);
            solution.values.push(v);
            solution.total += v;
            solution.ties.push(ties);
        }
        solution
    }

    /// The solution of `self` followed by `other`.
    pub fn concat(&self, other: &HindsightSolution) -> HindsightSolution {
        HindsightSolution {
            optimal: self.optimal.iter().chain(&other.optimal).cloned().collect(),
            values: self.values.iter().chain(&other.values).copied().collect(),
            total: self.total + other.total,
            ties: self.ties.iter().chain(&other.ties).cloned().collect(),
        }
    }
}

/// Size of the complete joint-action space, refusing past [`ORACLE_BUDGET`].
pub fn joint_space_size(counts: &[usize]) -> Result<usize> {
    let size: u128 = counts.iter().map(|&c| c as u128).product();
    if size > ORACLE_BUDGET {
        return Err(Error::EnumerationBudget {
            required: size,
            budget: ORACLE_BUDGET,
        });
    }
    Ok(size as usize)
}

/// Complete joint action number `code` in lexicographic order (agent 0 is
/// the most significant digit).
fn decode(mut code: usize, counts: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; counts.len()];
    for (d, &c) in digits.iter_mut().zip(counts).rev() {
        *d = code % c;
        code /= c;
    }
    digits
}

/// Exact maximizer of `f_t`: `(first maximizer, value, all tied maximizers)`.
pub fn best_joint_action<F: SetFunction + ?Sized>(
    f: &F,
    t: usize,
) -> Result<(JointAction, f64, Vec<JointAction>)> {
    let counts = f.action_counts();
    if counts.contains(&0) {
        return Err(Error::Parameter("every agent needs at least one action".into()));
    }
    let size = joint_space_size(counts)?;
    let mut scored = Vec::with_capacity(size);
    let mut best = (0, f64::NEG_INFINITY);
    for code in 0..size {
        let v = f.value(t, &JointAction::from_indices(&decode(code, counts)))?;
        if v > best.1 {
            best = (code, v);
        }
        scored.push(v);
    }
    let ties = scored
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= best.1 - TOLERANCE)
        .map(|(code, _)| JointAction::from_indices(&decode(code, counts)))
        .collect();
    Ok((
        JointAction::from_indices(&decode(best.0, counts)),
        best.1,
        ties,
    ))
}

/// Per-step exhaustive maximization over `t ∈ [0, horizon)`.
pub fn hindsight_optimal<F: SetFunction + Sync + ?Sized>(f: &F) -> Result<HindsightSolution> {
    joint_space_size(f.action_counts())?;
    let per_step = (0..f.horizon())
        .into_par_iter()
        .map(|t| best_joint_action(f, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(HindsightSolution::from_steps(per_step))
}

/// Number of per-agent switches in the optimal sequence.
pub fn delta_t(solution: &HindsightSolution) -> usize {
    solution
        .optimal
        .windows(2)
        .map(|w| w[0].shifts_to(&w[1]))
        .sum()
}

/// Smallest switch count over all sequences built from tied maximizers.
pub fn min_shift_delta_t(solution: &HindsightSolution) -> usize {
    let mut layers = solution.ties.iter();
    let Some(first) = layers.next() else {
        return 0;
    };
    let mut prev: Vec<(&JointAction, usize)> = first.iter().map(|a| (a, 0)).collect();
    for layer in layers {
        prev = layer
            .iter()
            .map(|a| {
                let cost = prev
                    .iter()
                    .map(|(b, c)| c + b.shifts_to(a))
                    .min()
                    .unwrap_or(0);
                (a, cost)
            })
            .collect();
    }
    prev.iter().map(|(_, c)| *c).min().unwrap_or(0)
}

/// `Σ_t f_t(command_t) / Σ_t f_t(opt_t)`, clamped to `[0, 1]`.
pub fn empirical_beta(command_values: &[f64], solution: &HindsightSolution) -> Result<f64> {
    if command_values.len() != solution.len() {
        return Err(Error::Parameter(format!(
            "command trace has {} steps, solution {}",
            command_values.len(),
            solution.len()
        )));
    }
    if solution.total <= 0.0 {
        return Err(Error::UndefinedBeta);
    }
    let cmd: f64 = command_values.iter().sum();
    Ok((cmd / solution.total).clamp(0.0, 1.0))
}

/// High-probability slack of two-armed EXP3-IX:
/// `4·sqrt(T ln 2) + (sqrt(4T / ln 2) + 1)·ln(2/δ)`.
pub fn exp3ix_allowance(horizon: usize, delta: f64) -> f64 {
    let t = horizon as f64;
    let ln2 = std::f64::consts::LN_2;
    4.0 * (t * ln2).sqrt() + ((4.0 * t / ln2).sqrt() + 1.0) * (2.0 / delta).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegretReport {
    pub horizon: usize,
    pub opt_total: f64,
    pub bsg_total: f64,
    pub command_total: f64,
    pub meta_total: f64,
    pub delta_t: usize,
    pub min_shift_delta_t: usize,
    /// `None` when the hindsight total is zero.
    pub empirical_beta: Option<f64>,
    pub confidence_delta: f64,
    /// `meta − max(bsg, command)`.
    pub meta_vs_best_slack: f64,
    /// `bsg − opt / 2`.
    pub bsg_half_opt_slack: f64,
    pub sqrt_t_constant: f64,
    /// Whether `meta ≥ max(bsg, command) − c·sqrt(T)`.
    pub meta_within_sqrt_t: bool,
    pub exp3ix_allowance: f64,
    /// Whether `meta ≥ max(bsg, command) − exp3ix_allowance`.
    pub meta_within_exp3ix_allowance: bool,
}

/// Assembles totals and slacks for MetaBSG, BSG and command-following
/// traces measured against the same hindsight solution.
pub fn bound_report(
    meta: &EpisodeTrace,
    bsg: &EpisodeTrace,
    command: &EpisodeTrace,
    solution: &HindsightSolution,
    delta: f64,
    sqrt_t_constant: f64,
) -> Result<RegretReport> {
    let horizon = solution.len();
    for (name, trace) in [("MetaBSG", meta), ("BSG", bsg), ("command", command)] {
        if trace.len() != horizon {
            return Err(Error::Parameter(format!(
                "{name} trace has {} steps, solution {horizon}",
                trace.len()
            )));
        }
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("confidence δ must be in (0, 1), got {delta}")));
    }
    let (meta_total, bsg_total) = (meta.total_value(), bsg.total_value());
    let command_values = command.values();
    let command_total: f64 = command_values.iter().sum();
    let best = bsg_total.max(command_total);
    let allowance = exp3ix_allowance(horizon, delta);
    let empirical_beta = match empirical_beta(&command_values, solution) {
        Ok(b) => Some(b),
        Err(Error::UndefinedBeta) => None,
        Err(e) => return Err(e),
    };
    Ok(RegretReport {
        horizon,
        opt_total: solution.total,
        bsg_total,
        command_total,
        meta_total,
        delta_t: delta_t(solution),
        min_shift_delta_t: min_shift_delta_t(solution),
        empirical_beta,
        confidence_delta: delta,
        meta_vs_best_slack: meta_total - best,
        bsg_half_opt_slack: bsg_total - 0.5 * solution.total,
        sqrt_t_constant,
        meta_within_sqrt_t: meta_total >= best - sqrt_t_constant * (horizon as f64).sqrt(),
        exp3ix_allowance: allowance,
        meta_within_exp3ix_allowance: meta_total >= best - allowance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordination::{run_episode, Algorithm, CoordinatorConfig, FnCommand, StaticEnvironment};
    use crate::submodular::{AgentId, FnSetFunction, WeightedCoverage};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn solution_of(actions: &[&[usize]]) -> HindsightSolution {
        HindsightSolution {
            optimal: actions.iter().map(|a| JointAction::from_indices(a)).collect(),
            values: vec![1.0; actions.len()],
            total: actions.len() as f64,
            ties: actions.iter().map(|a| vec![JointAction::from_indices(a)]).collect(),
        }
    }

    #[test]
    fn modular_optimum_is_per_agent_argmax() {
        let w = [[0.1, 0.4, 0.2], [0.3, 0.05, 0.3]];
        let f = FnSetFunction::new(vec![3, 3], 3, 1.0, move |_, s: &JointAction| {
            s.iter().map(|a| w[a.agent.0][a.index]).sum()
        });
        let sol = hindsight_optimal(&f).unwrap();
        // agent 1 ties between actions 0 and 2; lexicographic picks 0
        assert!(sol.optimal.iter().all(|a| *a == JointAction::from_indices(&[1, 0])));
        assert_eq!(sol.ties[0].len(), 2);
        assert!((sol.total - 3.0 * 0.7).abs() < 1e-12);
        assert_eq!(delta_t(&sol), 0);
    }

    #[test]
    fn two_by_two_table_matches_hand_enumeration() {
        let table = [[0.2, 0.7], [0.9, 0.5]];
        let f = FnSetFunction::new(vec![2, 2], 1, 1.0, move |_, s: &JointAction| {
            match (s.get(AgentId(0)), s.get(AgentId(1))) {
                (Some(a), Some(b)) => table[a][b],
                (None, None) => 0.0,
                _ => 0.1,
            }
        });
        let (best, value, _) = best_joint_action(&f, 0).unwrap();
        assert_eq!(best, JointAction::from_indices(&[1, 0]));
        assert_eq!(value, 0.9);
    }

    #[test]
    fn alternating_optimum_counts_shifts() {
        let sol = solution_of(&[&[0], &[1], &[0], &[1]]);
        assert_eq!(delta_t(&sol), 3);
        assert_eq!(delta_t(&solution_of(&[&[2usize, 1][..]; 5])), 0);
    }

    #[test]
    fn min_shift_uses_ties() {
        let mut sol = solution_of(&[&[0], &[1], &[0]]);
        sol.ties[1].insert(0, JointAction::from_indices(&[0]));
        assert_eq!(delta_t(&sol), 2);
        assert_eq!(min_shift_delta_t(&sol), 0);
    }

    #[test]
    fn beta_edge_cases() {
        let sol = solution_of(&[&[0], &[1]]);
        assert_eq!(empirical_beta(&[1.0, 1.0], &sol).unwrap(), 1.0);
        assert_eq!(empirical_beta(&[0.0, 0.0], &sol).unwrap(), 0.0);
        let zero = HindsightSolution {
            total: 0.0,
            ..sol.clone()
        };
        assert!(matches!(empirical_beta(&[0.0, 0.0], &zero), Err(Error::UndefinedBeta)));
        assert!(empirical_beta(&[1.0], &sol).is_err());
    }

    #[test]
    fn oracle_refuses_large_spaces() {
        let f = FnSetFunction::new(vec![8; 7], 1, 1.0, |_, _: &JointAction| 0.0);
        assert!(matches!(hindsight_optimal(&f), Err(Error::EnumerationBudget { .. })));
    }

    #[test]
    fn report_on_identical_traces_has_zero_slack() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = WeightedCoverage::random(&mut rng, 2, 4, 10).with_horizon(60);
        let sol = hindsight_optimal(&f).unwrap();
        let mut env = StaticEnvironment::new(f, FnCommand(|_| JointAction::from_indices(&[0, 0])));
        let bsg = run_episode(Algorithm::Bsg, &mut env, CoordinatorConfig::with_seed(1)).unwrap();
        let report = bound_report(&bsg, &bsg, &bsg, &sol, 0.05, 1.0).unwrap();
        assert_eq!(report.meta_vs_best_slack, 0.0);
        assert!(report.meta_within_sqrt_t);
        let short = run_episode(Algorithm::Bsg, &mut StaticEnvironment::new(
            WeightedCoverage::random(&mut rng, 2, 4, 10).with_horizon(10),
            FnCommand(|_| JointAction::from_indices(&[0, 0])),
        ), CoordinatorConfig::default()).unwrap();
        assert!(bound_report(&short, &bsg, &bsg, &sol, 0.05, 1.0).is_err());
        assert!(bound_report(&bsg, &bsg, &bsg, &sol, 1.5, 1.0).is_err());
    }

    #[test]
    fn allowance_formula() {
        let t = 100.0f64;
        let ln2 = std::f64::consts::LN_2;
        let expected = 4.0 * (t * ln2).sqrt() + ((4.0 * t / ln2).sqrt() + 1.0) * (2.0f64 / 0.1).ln();
        assert!((exp3ix_allowance(100, 0.1) - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn delta_is_additive_over_concatenation(
            a in proptest::collection::vec(proptest::collection::vec(0usize..3, 2), 1..20),
            b in proptest::collection::vec(proptest::collection::vec(0usize..3, 2), 1..20),
        ) {
            let sa = solution_of(&a.iter().map(Vec::as_slice).collect::<Vec<_>>());
            let sb = solution_of(&b.iter().map(Vec::as_slice).collect::<Vec<_>>());
            let boundary = sa.optimal.last().unwrap().shifts_to(&sb.optimal[0]);
            prop_assert_eq!(delta_t(&sa.concat(&sb)), delta_t(&sa) + delta_t(&sb) + boundary);
        }
    }
}
