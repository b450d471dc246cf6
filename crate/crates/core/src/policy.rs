use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::scalar::{sum_tolerance, Scalar};
use crate::table::{QTable, Table};

/// Normalization tolerance for policy rows.
pub const POLICY_SUM_TOL: f64 = 1e-12;

fn row_tol<T: Scalar>() -> T {
    sum_tolerance(POLICY_SUM_TOL)
}

/// A memoryless stochastic policy `pi(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy<T> {
    probs: Table<T>,
}

impl<T: Scalar> StochasticPolicy<T> {
    /// Wraps a probability table, checking non-negativity and row sums.
    pub fn new(probs: Table<T>) -> Result<Self> {
        let tol = row_tol::<T>();
        for s in 0..probs.n_states() {
            let row = probs.row(s);
            if let Some(a) = row.iter().position(|&p| !(p >= T::zero() && p <= T::one())) {
                return Err(Error::InvalidPolicy(format!(
                    "pi({a}|{s}) = {} is not a probability",
                    row[a]
                )));
            }
            let sum: T = row.iter().copied().sum();
            if !((sum - T::one()).abs() <= tol) {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {sum}")));
            }
        }
        Ok(Self { probs })
    }

    /// Accepts rows that sum to one within `tolerance` and rescales them exactly.
    pub fn normalized(mut probs: Table<T>, tolerance: T) -> Result<Self> {
        for s in 0..probs.n_states() {
            let row = probs.row_mut(s);
            if let Some(a) = row.iter().position(|&p| !(p >= T::zero())) {
                return Err(Error::InvalidPolicy(format!("pi({a}|{s}) = {} is negative", row[a])));
            }
            let sum: T = row.iter().copied().sum();
            if !((sum - T::one()).abs() <= tolerance) {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {sum}")));
            }
            row.iter_mut().for_each(|p| *p = *p / sum);
        }
        Self::new(probs)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = T::one() / T::from_usize(n_actions).expect("action count fits");
        Self {
            probs: Table::filled(n_states, n_actions, p),
        }
    }

    /// Row-wise softmax of `q`, computed in max-shifted form.
    pub fn softmax(q: &QTable<T>) -> Self {
        let mut probs = q.clone();
        for s in 0..probs.n_states() {
            softmax_in_place(probs.row_mut(s));
        }
        Self { probs }
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        let probs = Table::from_fn(actions.len(), n_actions, |s, a| {
            if actions[s] == a {
                T::one()
            } else {
                T::zero()
            }
        });
        Self { probs }
    }

    pub fn probs(&self) -> &Table<T> {
        &self.probs
    }

    pub fn into_table(self) -> Table<T> {
        self.probs
    }

    pub fn prob(&self, s: usize, a: usize) -> T {
        self.probs[(s, a)]
    }

    pub fn row(&self, s: usize) -> &[T] {
        self.probs.row(s)
    }

    pub fn n_states(&self) -> usize {
        self.probs.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.n_actions()
    }

    /// `Σ_a pi(a|s) f(a)`.
    pub fn mean(&self, s: usize, f: impl Fn(usize) -> T) -> T {
        self.row(s)
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (a, &p)| acc + p * f(a))
    }

    /// Sup-norm distance to `other` over the nonterminal states of `mdp`.
    /// Terminal rows carry no behavior and are ignored.
    pub fn deviation(&self, other: &Self, mdp: &Mdp<T>) -> T {
        mdp.nonterminal_states()
            .flat_map(|s| self.row(s).iter().zip(other.row(s)).map(|(&x, &y)| (x - y).abs()))
            .fold(T::zero(), T::max)
    }

    pub(crate) fn check_shape(&self, mdp: &Mdp<T>) -> Result<()> {
        if self.n_states() != mdp.n_states() || self.n_actions() != mdp.n_actions() {
            return Err(Error::ShapeMismatch(format!(
                "policy is {}x{}, MDP is {}x{}",
                self.n_states(),
                self.n_actions(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }

    /// Fails with `target-support` at the first entry below `floor`
    /// among nonterminal states.
    pub fn check_support(&self, mdp: &Mdp<T>, floor: T) -> Result<()> {
        for s in mdp.nonterminal_states() {
            for (a, &p) in self.row(s).iter().enumerate() {
                if !(p >= floor) {
                    return Err(Error::TargetSupport {
                        state: s,
                        action: a,
                        prob: p.as_f64(),
                        floor: floor.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total = total + *x;
    }
    for x in row.iter_mut() {
        *x = *x / total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_matches_closed_form() {
        let q = Table::from_vec(1, 2, vec![4.0f64, 1.0]).unwrap();
        let pi = StochasticPolicy::softmax(&q);
        let expected = 4f64.exp() / (4f64.exp() + 1f64.exp());
        assert!((pi.prob(0, 0) - expected).abs() < 1e-15);
        assert!((pi.prob(0, 0) - 0.95257).abs() < 1e-5);
    }

    #[test]
    fn softmax_survives_large_magnitudes() {
        let q = Table::from_vec(1, 3, vec![700.0f64, -700.0, 699.0]).unwrap();
        let pi = StochasticPolicy::softmax(&q);
        assert!(pi.probs().is_finite());
        assert!((pi.prob(0, 0) - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_rows() {
        let t = Table::from_vec(1, 2, vec![0.6f64, 0.5]).unwrap();
        assert!(StochasticPolicy::new(t.clone()).is_err());
        assert!(StochasticPolicy::normalized(t, 1e-9).is_err());
        let t = Table::from_vec(1, 2, vec![1.2f64, -0.2]).unwrap();
        assert!(StochasticPolicy::new(t).is_err());
    }

    #[test]
    fn normalized_rescales_within_tolerance() {
        let t = Table::from_vec(1, 3, vec![0.3333333333f64, 0.3333333333, 0.3333333334]).unwrap();
        let pi = StochasticPolicy::normalized(t, 1e-9).unwrap();
        let sum: f64 = pi.row(0).iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }

    proptest! {
        #[test]
        fn softmax_rows_are_normalized(q in proptest::collection::vec(-700.0f64..700.0, 12)) {
            let pi = StochasticPolicy::softmax(&Table::from_vec(3, 4, q).unwrap());
            for s in 0..3 {
                let sum: f64 = pi.row(s).iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn softmax_is_shift_invariant(
            q in proptest::collection::vec(-50.0f64..50.0, 12),
            shift in proptest::collection::vec(-100.0f64..100.0, 3),
        ) {
            let base = Table::from_vec(3, 4, q).unwrap();
            let shifted = Table::from_fn(3, 4, |s, a| base[(s, a)] + shift[s]);
            let d = StochasticPolicy::softmax(&base).probs().sup_diff(StochasticPolicy::softmax(&shifted).probs());
            prop_assert!(d <= 1e-12);
        }
    }
}
