use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::Mdp;
use crate::policy::StochasticPolicy;
use crate::scalar::Scalar;

/// A sampled state-action sequence.
///
/// Transitions are read off consecutive pairs. A trajectory that reaches a
/// terminal state ends with that state paired with action 0, so the final
/// transition into the terminal is recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub steps: Vec<(usize, usize)>,
    /// Per-step reward, when known.
    pub rewards: Option<Vec<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn from_steps(steps: Vec<(usize, usize)>) -> Self {
        Self { steps, rewards: None }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Observed `(s, a, s')` triples.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.steps.windows(2).map(|w| (w[0].0, w[0].1, w[1].0))
    }

    /// True when every observed transition has positive probability in `mdp`.
    pub fn is_consistent_with(&self, mdp: &Mdp<T>) -> bool {
        self.transitions().all(|(s, a, n)| {
            s < mdp.n_states()
                && a < mdp.n_actions()
                && mdp.successors(s, a).iter().any(|&(m, p)| m == n && p > T::zero())
        })
    }
}

fn sample_index<T: Scalar>(rng: &mut impl Rng, weights: impl Iterator<Item = (usize, T)>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights {
        let w = w.as_f64();
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Samples `n` trajectories from `mu0` under `policy`, each at most
/// `max_len` pairs long. The same seed always yields the same output.
pub fn simulate<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    n: usize,
    seed: u64,
    max_len: usize,
) -> Vec<Trajectory<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut steps = Vec::new();
            let mut rewards = Vec::new();
            let mut s = sample_index(&mut rng, mdp.mu0().iter().copied().enumerate());
            while steps.len() < max_len {
                if mdp.is_terminal(s) {
                    steps.push((s, 0));
                    rewards.push(T::zero());
                    break;
                }
                let a = sample_index(&mut rng, policy.row(s).iter().copied().enumerate());
                steps.push((s, a));
                rewards.push(mdp.reward(s, a));
                s = sample_index(&mut rng, mdp.successors(s, a).iter().copied());
            }
            Trajectory {
                steps,
                rewards: Some(rewards),
            }
        })
        .collect()
}
