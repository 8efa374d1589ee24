use crate::submodular::{ActionId, JointAction};

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("agent {agent} already assigned in the base set")]
    AgentAlreadyAssigned { agent: usize },

    #[error("bandit-feedback violation at t={t}: queried {queried} but executed {executed}")]
    FeedbackViolation {
        t: usize,
        queried: JointAction,
        executed: JointAction,
    },

    #[error("normalization contract broken at t={t} on {set}: raw value {raw} outside [{lower}, {upper}]")]
    OutOfBounds {
        t: usize,
        set: JointAction,
        raw: f64,
        lower: f64,
        upper: f64,
    },

    #[error("reward {0} outside [0, 1]")]
    RewardRange(f64),

    #[error("learner state corrupted: {0}")]
    StateCorruption(String),

    #[error("enumeration budget exceeded: {required} > {budget}")]
    EnumerationBudget { required: u128, budget: u128 },

    #[error("empirical beta undefined: hindsight optimum total is zero")]
    UndefinedBeta,

    #[error("action {action} is not in agent's action set")]
    UnknownAction { action: ActionId },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
