//! Additional rewards that move an agent's MCE policy onto a target policy.
//!
//! For a target `pi_t` and any state potential `beta`, the additional
//! Q-function
//!
//! ```text
//! ΔQ(s,a) = ln pi_t(a|s) - Q_o^{pi_t}(s,a) + beta(s)
//! ```
//!
//! makes `pi_t` the MCE policy of the MDP with rewards `R_o + ΔR`, where
//! `ΔR(s,a) = ΔQ(s,a) - γ Σ_s' T(s'|s,a) Σ_a' pi_t(a'|s') ΔQ(s',a')`.
//! `Q_o^{pi_t}` is the evaluation of `pi_t` under the original rewards.

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::StochasticPolicy;
use crate::scalar::Scalar;
use crate::solve::{mce_policy, policy_evaluation_q, SolverOptions};
use crate::table::{QTable, Table};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvancementOptions {
    /// Smallest admissible target probability on nonterminal states.
    pub epsilon_floor: f64,
    /// Largest policy deviation accepted by [`verify_transformation`].
    pub verify_tolerance: f64,
    pub solver: SolverOptions,
}

impl Default for AdvancementOptions {
    fn default() -> Self {
        Self {
            epsilon_floor: 1e-8,
            verify_tolerance: 1e-6,
            solver: SolverOptions::default(),
        }
    }
}

/// One member of the advancement family, fixed by its `beta`.
#[derive(Debug, Clone)]
pub struct AdvancementSolution<T> {
    pub beta: Vec<T>,
    pub delta_q: QTable<T>,
    pub delta_r: Table<T>,
    pub target: StochasticPolicy<T>,
}

/// Recovers the additional reward from an additional Q-function by the
/// Bellman relation under `policy`. Terminal rows are zero.
pub fn reward_from_delta_q<T: Scalar>(mdp: &Mdp<T>, policy: &StochasticPolicy<T>, delta_q: &QTable<T>) -> Table<T> {
    let values: Vec<T> = (0..mdp.n_states())
        .map(|s| {
            if mdp.is_terminal(s) {
                T::zero()
            } else {
                policy.mean(s, |a| delta_q[(s, a)])
            }
        })
        .collect();
    let gamma = mdp.gamma();
    Table::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        if mdp.is_terminal(s) {
            T::zero()
        } else {
            delta_q[(s, a)] - gamma * mdp.expect(s, a, |n| values[n])
        }
    })
}

/// Evaluates the advancement family at `beta`.
///
/// `beta` entries on terminal states are ignored and stored as zero.
pub fn advancement_delta_q<T: Scalar>(
    mdp: &Mdp<T>,
    target: &StochasticPolicy<T>,
    beta: &[T],
    options: &AdvancementOptions,
) -> Result<AdvancementSolution<T>> {
    target.check_shape(mdp)?;
    if beta.len() != mdp.n_states() {
        return Err(Error::ShapeMismatch(format!(
            "beta has length {}, MDP has {} states",
            beta.len(),
            mdp.n_states()
        )));
    }
    if let Some(s) = beta.iter().position(|b| !b.is_finite()) {
        return Err(Error::InvalidInput(format!("beta[{s}] is not finite")));
    }
    target.check_support(mdp, T::of(options.epsilon_floor))?;

    let q_target = policy_evaluation_q(mdp, target, options.solver.tolerance, options.solver.max_iters)?;
    let beta: Vec<T> = beta
        .iter()
        .enumerate()
        .map(|(s, &b)| if mdp.is_terminal(s) { T::zero() } else { b })
        .collect();
    let delta_q = Table::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        if mdp.is_terminal(s) {
            T::zero()
        } else {
            target.prob(s, a).ln() - q_target[(s, a)] + beta[s]
        }
    });
    let delta_r = reward_from_delta_q(mdp, target, &delta_q);
    Ok(AdvancementSolution {
        beta,
        delta_q,
        delta_r,
        target: target.clone(),
    })
}

/// `mdp` with `delta_r` added to its rewards.
pub fn advanced_mdp<T: Scalar>(mdp: &Mdp<T>, delta_r: &Table<T>) -> Result<Mdp<T>> {
    if !mdp.rewards().same_shape(delta_r) {
        return Err(Error::ShapeMismatch(
            "additional reward table has the wrong shape".into(),
        ));
    }
    mdp.with_rewards(mdp.rewards().zip_with(delta_r, |r, d| r + d))
}

/// Outcome of re-solving the advanced MDP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationReport {
    /// Sup-norm distance between the recomputed MCE policy and the target,
    /// over nonterminal states.
    pub max_deviation: f64,
    pub pass: bool,
}

/// Re-solves the MCE policy with rewards `R_o + ΔR` and compares it to the
/// target.
pub fn verify_transformation<T: Scalar>(
    mdp: &Mdp<T>,
    solution: &AdvancementSolution<T>,
    tolerance: f64,
    solver: &SolverOptions,
) -> Result<VerificationReport> {
    solution.target.check_shape(mdp)?;
    let advanced = advanced_mdp(mdp, &solution.delta_r)?;
    let mce = mce_policy(&advanced, solver)?;
    let max_deviation = mce.policy.deviation(&solution.target, mdp).as_f64();
    Ok(VerificationReport {
        max_deviation,
        pass: max_deviation <= tolerance,
    })
}
