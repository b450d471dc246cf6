//! Random MDPs, policies and potentials for property tests and benchmarks.

use std::ops::RangeInclusive;

use rand::Rng;

use crate::mdp::Mdp;
use crate::policy::StochasticPolicy;
use crate::scalar::{sum_tolerance, Scalar};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomMdpConfig {
    pub states: RangeInclusive<usize>,
    pub actions: RangeInclusive<usize>,
    /// Discount factors to choose from, uniformly.
    pub gammas: Vec<f64>,
    /// Upper bound on the number of distinct successors per pair.
    pub max_successors: usize,
    /// Probability sent straight to the terminal from every pair when the
    /// chosen discount is 1, so every policy terminates.
    pub terminal_mass: f64,
    /// Rewards are uniform in `[-reward_scale, reward_scale]`.
    pub reward_scale: f64,
}

impl Default for RandomMdpConfig {
    fn default() -> Self {
        Self {
            states: 5..=20,
            actions: 2..=5,
            gammas: vec![0.9, 1.0],
            max_successors: 3,
            terminal_mass: 0.2,
            reward_scale: 1.0,
        }
    }
}

impl RandomMdpConfig {
    /// At most three states (terminal included) and three actions.
    pub fn tiny() -> Self {
        Self {
            states: 2..=3,
            actions: 1..=3,
            ..Self::default()
        }
    }
}

fn random_simplex(rng: &mut impl Rng, n: usize, floor: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| floor + rng.gen::<f64>()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// A random MDP whose last state is the only terminal.
pub fn random_mdp<T: Scalar>(rng: &mut impl Rng, config: &RandomMdpConfig) -> Mdp<T> {
    let ns = rng.gen_range(config.states.clone()).max(2);
    let na = rng.gen_range(config.actions.clone()).max(1);
    let gamma = config.gammas[rng.gen_range(0..config.gammas.len())];
    let terminal = ns - 1;
    let mut builder = Mdp::builder(ns, na).gamma(T::of(gamma));
    for s in 0..terminal {
        for a in 0..na {
            let k = rng.gen_range(1..=config.max_successors.max(1));
            let probs = random_simplex(rng, k, 0.1);
            let scale = if gamma >= 1.0 { 1.0 - config.terminal_mass } else { 1.0 };
            for p in probs {
                builder = builder.transition(s, a, rng.gen_range(0..ns), T::of(scale * p));
            }
            if gamma >= 1.0 {
                builder = builder.transition(s, a, terminal, T::of(config.terminal_mass));
            }
            builder = builder.reward(s, a, T::of(rng.gen_range(-config.reward_scale..=config.reward_scale)));
        }
    }
    let mut mu0: Vec<T> = random_simplex(rng, terminal, 0.1).into_iter().map(T::of).collect();
    mu0.push(T::zero());
    builder
        .terminal(terminal)
        .mu0(mu0)
        .build()
        .expect("generated MDPs are valid")
}

/// A policy with every probability at least `floor / (n_actions (1 + floor))`.
pub fn random_policy<T: Scalar>(
    rng: &mut impl Rng,
    n_states: usize,
    n_actions: usize,
    floor: f64,
) -> StochasticPolicy<T> {
    let data = (0..n_states)
        .flat_map(|_| random_simplex(rng, n_actions, floor))
        .map(T::of)
        .collect();
    let table = Table::from_vec(n_states, n_actions, data).expect("shape matches");
    StochasticPolicy::normalized(table, sum_tolerance(1e-9)).expect("rows sum to one")
}

/// A state potential uniform in `[-scale, scale]`, zero on terminals.
pub fn random_beta<T: Scalar>(rng: &mut impl Rng, mdp: &Mdp<T>, scale: f64) -> Vec<T> {
    (0..mdp.n_states())
        .map(|s| {
            let b = rng.gen_range(-scale..=scale);
            if mdp.is_terminal(s) {
                T::zero()
            } else {
                T::of(b)
            }
        })
        .collect()
}
