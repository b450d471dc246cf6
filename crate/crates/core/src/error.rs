use crate::mdp::ValidationReport;

/// Which side of an interval was violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Lower => write!(f, "lower"),
            Side::Upper => write!(f, "upper"),
        }
    }
}

#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(ValidationReport),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid feature model: {0}")]
    InvalidFeatures(String),

    #[error("invalid object-world spec: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An iterative solver hit its iteration cap.
    #[error("nonconvergent: {what} stopped after {iterations} iterations with residual {residual:e}")]
    Nonconvergent {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },

    /// Q-values left the range where the softmax is numerically meaningful.
    #[error("q-magnitude: |Q| reached {value:e}, limit is {limit:e}")]
    QMagnitude { value: f64, limit: f64 },

    #[error("entropy-domain: D({state},{action}) > 0 but pi({action}|{state}) = 0")]
    EntropyDomain { state: usize, action: usize },

    #[error("target-support: pi_t({action}|{state}) = {prob:e} is below the floor {floor:e}")]
    TargetSupport {
        state: usize,
        action: usize,
        prob: f64,
        floor: f64,
    },

    /// `beta_min(s) > beta_max(s)` at the listed states.
    #[error("no-valid-solution: beta_min > beta_max at states {states:?}")]
    NoValidSolution { states: Vec<usize> },

    /// `beta_min` is consistent but its additional reward leaves
    /// `[r_min, r_max]` at the listed pairs.
    #[error("no-valid-solution: additional reward at beta_min leaves [r_min, r_max] at pairs {pairs:?}")]
    RewardOutOfBounds { pairs: Vec<(usize, usize)> },

    #[error("not-achievable: additional reward {value} violates the {side} bound {bound}")]
    NotAchievable { value: f64, bound: f64, side: Side },

    #[error("no-data: no trajectories supplied")]
    NoData,

    #[error("coverage: unobserved state-action pairs {pairs:?}")]
    Coverage { pairs: Vec<(usize, usize)> },

    #[error("cross-check failed: {what} disagree ({first:e} vs {second:e})")]
    CrossCheck {
        what: &'static str,
        first: f64,
        second: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
