//! Minimum-cost additional rewards that steer a maximum-causal-entropy agent
//! onto a target policy.
//!
//! The crate is generic over the scalar type (`f32` or `f64`) through
//! [`Scalar`]; the `*64` aliases at the root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advancement;
pub mod error;
pub mod estimation;
pub mod generate;
pub mod io;
pub mod mdp;
pub mod mincost;
pub mod objectworld;
pub mod policy;
pub mod scalar;
pub mod simulate;
pub mod solve;
pub mod table;

pub use advancement::{
    advanced_mdp, advancement_delta_q, reward_from_delta_q, verify_transformation, AdvancementOptions,
    AdvancementSolution, VerificationReport,
};
pub use error::{Error, Result, Side};
pub use estimation::{
    advancement_error, advancement_mae, estimate_transitions, sample_based_min_reward,
    sample_based_min_reward_with_bounds, EmpiricalModel, Fallback, ModelSkeleton,
};
pub use mdp::{validate_mdp, Mdp, MdpBuilder, ValidationReport, Violation};
pub use mincost::{
    assign_features, beta_bounds, compute_k, min_cost_of_reward, min_reward_solution, min_reward_solution_with_bounds,
    objective_value, reward_from_beta, BetaBounds, FeatureModel, MinCostOptions, MinCostSolution, RewardBounds,
};
pub use objectworld::{build_object_world, run_accuracy_experiment, run_cost_curve_experiment, ObjectWorldSpec};
pub use policy::StochasticPolicy;
pub use scalar::Scalar;
pub use simulate::{simulate, Trajectory};
pub use solve::{
    causal_entropy, expected_return, mce_policy, policy_evaluation_q, policy_evaluation_q_from, visitation_frequencies,
    MceSolution, SolverOptions,
};
pub use table::{QTable, Table, VisitationTable};

pub type Mdp64 = Mdp<f64>;
pub type Policy64 = StochasticPolicy<f64>;
pub type Table64 = Table<f64>;
pub type FeatureModel64 = FeatureModel<f64>;
pub type AdvancementSolution64 = AdvancementSolution<f64>;
pub type MinCostSolution64 = MinCostSolution<f64>;
pub type Trajectory64 = Trajectory<f64>;

pub type Mdp32 = Mdp<f32>;
pub type Policy32 = StochasticPolicy<f32>;
pub type Table32 = Table<f32>;
