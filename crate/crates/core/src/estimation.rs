//! Transition estimates from demonstrated trajectories, for running the
//! min-cost pipeline when `T` is unknown.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::mincost::{min_reward_solution_with_bounds, FeatureModel, MinCostOptions, MinCostSolution, RewardBounds};
use crate::policy::StochasticPolicy;
use crate::scalar::Scalar;
use crate::simulate::Trajectory;
use crate::table::Table;

/// Maximum-likelihood transition counts and their normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel<T> {
    n_states: usize,
    n_actions: usize,
    counts: Vec<BTreeMap<usize, u64>>,
    transitions: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> EmpiricalModel<T> {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn counts(&self, s: usize, a: usize) -> &BTreeMap<usize, u64> {
        &self.counts[s * self.n_actions + a]
    }

    /// Estimated successor distribution; empty when `(s, a)` was never seen.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, T)] {
        &self.transitions[s * self.n_actions + a]
    }

    pub fn is_observed(&self, s: usize, a: usize) -> bool {
        !self.counts(s, a).is_empty()
    }

    /// Unobserved pairs, skipping the states in `ignore`.
    pub fn unobserved(&self, ignore: &[usize]) -> Vec<(usize, usize)> {
        (0..self.n_states)
            .filter(|s| !ignore.contains(s))
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .filter(|&(s, a)| !self.is_observed(s, a))
            .collect()
    }

    /// Substitutes the estimates for the transitions of `known`.
    ///
    /// Terminal rows keep their absorbing self-loops. Unobserved nonterminal
    /// pairs are handled according to `fallback`.
    pub fn to_mdp(&self, known: &ModelSkeleton<T>, fallback: Fallback) -> Result<Mdp<T>> {
        if known.rewards.n_states() != self.n_states || known.rewards.n_actions() != self.n_actions {
            return Err(Error::ShapeMismatch(format!(
                "estimates are {}x{}, known model is {}x{}",
                self.n_states,
                self.n_actions,
                known.rewards.n_states(),
                known.rewards.n_actions()
            )));
        }
        let gaps = self.unobserved(&known.terminals);
        if fallback == Fallback::Reject && !gaps.is_empty() {
            return Err(Error::Coverage { pairs: gaps });
        }
        let uniform = T::one() / T::from_usize(self.n_states).expect("state count fits");
        let mut transitions = Vec::with_capacity(self.transitions.len());
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = if known.terminals.contains(&s) {
                    vec![(s, T::one())]
                } else if self.is_observed(s, a) {
                    self.successors(s, a).to_vec()
                } else {
                    (0..self.n_states).map(|n| (n, uniform)).collect()
                };
                transitions.push(row);
            }
        }
        Mdp::new(
            self.n_states,
            self.n_actions,
            transitions,
            known.rewards.clone(),
            known.mu0.clone(),
            known.gamma,
            &known.terminals,
        )
    }
}

/// Treatment of state-action pairs absent from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// Successor drawn uniformly from all states.
    UniformSuccessor,
    /// Abort with a `coverage` error.
    Reject,
}

/// Everything about an MDP except its transitions.
#[derive(Debug, Clone)]
pub struct ModelSkeleton<T> {
    pub rewards: Table<T>,
    pub mu0: Vec<T>,
    pub gamma: T,
    pub terminals: Vec<usize>,
}

impl<T: Scalar> ModelSkeleton<T> {
    pub fn of(mdp: &Mdp<T>) -> Self {
        Self {
            rewards: mdp.rewards().clone(),
            mu0: mdp.mu0().to_vec(),
            gamma: mdp.gamma(),
            terminals: mdp.terminals(),
        }
    }
}

/// Counts observed `(s, a, s')` triples and normalizes them row by row.
pub fn estimate_transitions<T: Scalar>(
    trajectories: &[Trajectory<T>],
    n_states: usize,
    n_actions: usize,
) -> Result<EmpiricalModel<T>> {
    if trajectories.is_empty() {
        return Err(Error::NoData);
    }
    let mut counts = vec![BTreeMap::new(); n_states * n_actions];
    for (i, t) in trajectories.iter().enumerate() {
        if let Some(&(s, a)) = t.steps.iter().find(|&&(s, a)| s >= n_states || a >= n_actions) {
            return Err(Error::InvalidInput(format!(
                "trajectory {i} has pair ({s},{a}) outside {n_states}x{n_actions}"
            )));
        }
        for (s, a, n) in t.transitions() {
            *counts[s * n_actions + a].entry(n).or_insert(0u64) += 1;
        }
    }
    let transitions = counts
        .iter()
        .map(|row: &BTreeMap<usize, u64>| {
            let total: u64 = row.values().sum();
            let total = T::from_u64(total).expect("count fits");
            row.iter()
                .map(|(&n, &c)| (n, T::from_u64(c).expect("count fits") / total))
                .collect()
        })
        .collect();
    Ok(EmpiricalModel {
        n_states,
        n_actions,
        counts,
        transitions,
    })
}

/// The min-cost pipeline on transitions estimated from `trajectories`.
pub fn sample_based_min_reward<T: Scalar>(
    trajectories: &[Trajectory<T>],
    known: &ModelSkeleton<T>,
    target: &StochasticPolicy<T>,
    features: &FeatureModel<T>,
    fallback: Fallback,
    options: &MinCostOptions,
) -> Result<MinCostSolution<T>> {
    sample_based_min_reward_with_bounds(
        trajectories,
        known,
        target,
        features,
        &RewardBounds::from_features(features),
        fallback,
        options,
    )
}

pub fn sample_based_min_reward_with_bounds<T: Scalar>(
    trajectories: &[Trajectory<T>],
    known: &ModelSkeleton<T>,
    target: &StochasticPolicy<T>,
    features: &FeatureModel<T>,
    bounds: &RewardBounds<T>,
    fallback: Fallback,
    options: &MinCostOptions,
) -> Result<MinCostSolution<T>> {
    let model = estimate_transitions(trajectories, known.rewards.n_states(), known.rewards.n_actions())?;
    let mdp = model.to_mdp(known, fallback)?;
    min_reward_solution_with_bounds(&mdp, target, features, bounds, options)
}

fn check_same_shape<T: Scalar>(a: &MinCostSolution<T>, b: &MinCostSolution<T>) -> Result<()> {
    if !a.delta_r_star.same_shape(&b.delta_r_star) {
        return Err(Error::ShapeMismatch(format!(
            "solutions are {}x{} and {}x{}",
            a.delta_r_star.n_states(),
            a.delta_r_star.n_actions(),
            b.delta_r_star.n_states(),
            b.delta_r_star.n_actions()
        )));
    }
    Ok(())
}

/// Sup-norm difference of the two minimum additional rewards. Terminal
/// rows are zero in both, so only nonterminal pairs contribute.
pub fn advancement_error<T: Scalar>(estimated: &MinCostSolution<T>, exact: &MinCostSolution<T>) -> Result<T> {
    check_same_shape(estimated, exact)?;
    Ok(estimated.delta_r_star.sup_diff(&exact.delta_r_star))
}

/// Mean absolute difference of the minimum additional rewards over the
/// nonterminal pairs of `mdp`.
pub fn advancement_mae<T: Scalar>(
    estimated: &MinCostSolution<T>,
    exact: &MinCostSolution<T>,
    mdp: &Mdp<T>,
) -> Result<T> {
    check_same_shape(estimated, exact)?;
    let mut total = T::zero();
    let mut count = 0usize;
    for s in mdp.nonterminal_states() {
        for a in 0..mdp.n_actions() {
            total = total + (estimated.delta_r_star[(s, a)] - exact.delta_r_star[(s, a)]).abs();
            count += 1;
        }
    }
    Ok(if count == 0 {
        T::zero()
    } else {
        total / T::from_usize(count).expect("pair count fits")
    })
}
