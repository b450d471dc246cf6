//! Min-cost reward advancement.
//!
//! The min-reward stage picks the smallest state potential `beta` whose
//! additional reward stays inside `[r_min, r_max]`. Writing
//!
//! ```text
//! k(s,a) = ln pi_t(a|s) - γ Σ_s' T(s'|s,a) Σ_a' pi_t(a'|s') ln pi_t(a'|s') - R_o(s,a)
//! ```
//!
//! the additional reward at `beta` is `beta(s) - γ Σ_s' T(s'|s,a) beta(s') + k(s,a)`,
//! so the bounds become two Bellman recursions:
//!
//! ```text
//! beta_min(s) = max_a ( γ Σ_s' T(s'|s,a) beta_min(s') + r_min - k(s,a) )
//! beta_max(s) = min_a ( γ Σ_s' T(s'|s,a) beta_max(s') + r_max - k(s,a) )
//! ```
//!
//! The assignment stage ([`assign`]) then prices each pair's reward.

pub mod assign;

pub use assign::{assign_features, min_cost_of_reward, FeatureModel, RewardBounds};

use crate::advancement::{advancement_delta_q, AdvancementOptions, AdvancementSolution};
use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::StochasticPolicy;
use crate::scalar::Scalar;
use crate::solve::visitation_frequencies;
use crate::table::Table;

/// Slack allowed on reward bounds and on `beta_min <= beta_max`.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MinCostOptions {
    pub advancement: AdvancementOptions,
}

/// `k(s,a)`: the part of the additional reward that does not depend on `beta`.
/// Terminal rows are zero and terminal successors contribute no entropy.
pub fn compute_k<T: Scalar>(mdp: &Mdp<T>, target: &StochasticPolicy<T>, epsilon_floor: f64) -> Result<Table<T>> {
    target.check_shape(mdp)?;
    target.check_support(mdp, T::of(epsilon_floor))?;
    let neg_entropy: Vec<T> = (0..mdp.n_states())
        .map(|s| {
            if mdp.is_terminal(s) {
                T::zero()
            } else {
                target.mean(s, |a| target.prob(s, a).ln())
            }
        })
        .collect();
    let gamma = mdp.gamma();
    Ok(Table::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        if mdp.is_terminal(s) {
            T::zero()
        } else {
            target.prob(s, a).ln() - gamma * mdp.expect(s, a, |n| neg_entropy[n]) - mdp.reward(s, a)
        }
    }))
}

/// Lower and upper potential bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaBounds<T> {
    pub beta_min: Vec<T>,
    pub beta_max: Vec<T>,
    /// States where `beta_min > beta_max + BOUND_SLACK`.
    pub infeasible: Vec<usize>,
}

impl<T> BetaBounds<T> {
    pub fn feasible(&self) -> bool {
        self.infeasible.is_empty()
    }
}

#[derive(Clone, Copy)]
enum Backup {
    Max,
    Min,
}

fn bound_iteration<T: Scalar>(
    mdp: &Mdp<T>,
    k: &Table<T>,
    bound: impl Fn(usize, usize) -> T,
    backup: Backup,
    tolerance: T,
    max_iters: usize,
    what: &'static str,
) -> Result<Vec<T>> {
    let ns = mdp.n_states();
    let gamma = mdp.gamma();
    let mut beta = vec![T::zero(); ns];
    let mut next = beta.clone();
    let mut increment = T::infinity();
    for _ in 0..max_iters {
        increment = T::zero();
        for s in 0..ns {
            if mdp.is_terminal(s) {
                next[s] = T::zero();
                continue;
            }
            let candidates =
                (0..mdp.n_actions()).map(|a| gamma * mdp.expect(s, a, |n| beta[n]) + bound(s, a) - k[(s, a)]);
            next[s] = match backup {
                Backup::Max => candidates.fold(T::neg_infinity(), T::max),
                Backup::Min => candidates.fold(T::infinity(), T::min),
            };
            increment = increment.max((next[s] - beta[s]).abs());
        }
        std::mem::swap(&mut beta, &mut next);
        if !increment.is_finite() {
            break;
        }
        if increment <= tolerance {
            return Ok(beta);
        }
    }
    Err(Error::Nonconvergent {
        what,
        residual: increment.as_f64(),
        iterations: max_iters,
    })
}

/// Value iteration for `beta_min` (max backup over `r_min - k`) and
/// `beta_max` (min backup over `r_max - k`), both from zero with terminals
/// pinned at zero.
pub fn beta_bounds<T: Scalar>(
    mdp: &Mdp<T>,
    k: &Table<T>,
    bounds: &RewardBounds<T>,
    tolerance: f64,
    max_iters: usize,
) -> Result<BetaBounds<T>> {
    if !k.same_shape(mdp.rewards()) {
        return Err(Error::ShapeMismatch("k table has the wrong shape".into()));
    }
    let tol = T::of(tolerance);
    let beta_min = bound_iteration(
        mdp,
        k,
        |s, a| bounds.lower(s, a),
        Backup::Max,
        tol,
        max_iters,
        "beta_min",
    )?;
    let beta_max = bound_iteration(
        mdp,
        k,
        |s, a| bounds.upper(s, a),
        Backup::Min,
        tol,
        max_iters,
        "beta_max",
    )?;
    let slack = T::of(BOUND_SLACK);
    let infeasible = (0..mdp.n_states())
        .filter(|&s| beta_min[s] > beta_max[s] + slack)
        .collect();
    Ok(BetaBounds {
        beta_min,
        beta_max,
        infeasible,
    })
}

/// `beta(s) - γ Σ_s' T(s'|s,a) beta(s') + k(s,a)`, zero on terminal rows.
pub fn reward_from_beta<T: Scalar>(mdp: &Mdp<T>, k: &Table<T>, beta: &[T]) -> Table<T> {
    let gamma = mdp.gamma();
    Table::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        if mdp.is_terminal(s) {
            T::zero()
        } else {
            beta[s] - gamma * mdp.expect(s, a, |n| beta[n]) + k[(s, a)]
        }
    })
}

/// `Σ_s μ0(s) Σ_a pi_t(a|s) ΔQ(s,a)` over nonterminal states.
pub fn objective_value<T: Scalar>(mdp: &Mdp<T>, target: &StochasticPolicy<T>, solution: &AdvancementSolution<T>) -> T {
    mdp.nonterminal_states()
        .map(|s| mdp.mu0()[s] * target.mean(s, |a| solution.delta_q[(s, a)]))
        .sum()
}

/// Output of the two-stage pipeline.
#[derive(Debug, Clone)]
pub struct MinCostSolution<T> {
    /// The advancement at `beta = beta_min`.
    pub advancement: AdvancementSolution<T>,
    pub beta_min: Vec<T>,
    pub beta_max: Vec<T>,
    pub k: Table<T>,
    /// Closed-form minimum additional reward.
    pub delta_r_star: Table<T>,
    pub objective: T,
    /// `ΔF(s,a)` indexed by `s * n_actions + a`; empty rows belong to terminals.
    pub assignments: Vec<Vec<T>>,
    /// Minimum implementation cost per pair, zero on terminals.
    pub costs: Table<T>,
    /// `Σ_{s,a} D_{pi_t}(s,a) C(s,a)`: expected cost of one trajectory under the target.
    pub total_cost: T,
}

impl<T: Scalar> MinCostSolution<T> {
    pub fn assignment(&self, s: usize, a: usize) -> &[T] {
        &self.assignments[s * self.costs.n_actions() + a]
    }
}

/// Full pipeline with the global bounds implied by `features`.
pub fn min_reward_solution<T: Scalar>(
    mdp: &Mdp<T>,
    target: &StochasticPolicy<T>,
    features: &FeatureModel<T>,
    options: &MinCostOptions,
) -> Result<MinCostSolution<T>> {
    min_reward_solution_with_bounds(mdp, target, features, &RewardBounds::from_features(features), options)
}

/// Full pipeline with explicit (possibly per-pair) reward bounds.
pub fn min_reward_solution_with_bounds<T: Scalar>(
    mdp: &Mdp<T>,
    target: &StochasticPolicy<T>,
    features: &FeatureModel<T>,
    bounds: &RewardBounds<T>,
    options: &MinCostOptions,
) -> Result<MinCostSolution<T>> {
    bounds.check_against(features)?;
    let adv = &options.advancement;
    let k = compute_k(mdp, target, adv.epsilon_floor)?;
    let BetaBounds {
        beta_min,
        beta_max,
        infeasible,
    } = beta_bounds(mdp, &k, bounds, adv.solver.tolerance, adv.solver.max_iters)?;
    if !infeasible.is_empty() {
        return Err(Error::NoValidSolution { states: infeasible });
    }

    let delta_r_star = reward_from_beta(mdp, &k, &beta_min);
    let slack = T::of(BOUND_SLACK);
    let out_of_bounds: Vec<(usize, usize)> = delta_r_star
        .iter()
        .filter(|&(s, a, r)| !mdp.is_terminal(s) && (r < bounds.lower(s, a) - slack || r > bounds.upper(s, a) + slack))
        .map(|(s, a, _)| (s, a))
        .collect();
    if !out_of_bounds.is_empty() {
        return Err(Error::RewardOutOfBounds { pairs: out_of_bounds });
    }

    let advancement = advancement_delta_q(mdp, target, &beta_min, adv)?;
    let objective = objective_value(mdp, target, &advancement);

    let mut assignments = Vec::with_capacity(mdp.n_states() * mdp.n_actions());
    let mut costs = Table::zeros(mdp.n_states(), mdp.n_actions());
    for (s, a, r) in delta_r_star.iter() {
        if mdp.is_terminal(s) {
            assignments.push(Vec::new());
            continue;
        }
        // Within BOUND_SLACK of the interval by the check above.
        let r = r.max(bounds.lower(s, a)).min(bounds.upper(s, a));
        let delta_f = assign_features(r, features)?;
        costs[(s, a)] = features.cost_of(&delta_f);
        assignments.push(delta_f);
    }

    let visits = visitation_frequencies(mdp, target, adv.solver.tolerance, adv.solver.max_iters)?;
    let total_cost = visits.iter().map(|(s, a, d)| d * costs[(s, a)]).sum();

    Ok(MinCostSolution {
        advancement,
        beta_min,
        beta_max,
        k,
        delta_r_star,
        objective,
        assignments,
        costs,
        total_cost,
    })
}
