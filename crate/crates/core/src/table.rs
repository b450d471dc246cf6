use std::ops::{Index, IndexMut};

use crate::scalar::{sup_diff, Scalar};

/// Dense table indexed by `(state, action)`, stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<T> {
    n_states: usize,
    n_actions: usize,
    data: Vec<T>,
}

/// Q-values `Q(s, a)` in reward units.
pub type QTable<T> = Table<T>;

/// Expected (discounted) visit counts `D(s, a)`.
pub type VisitationTable<T> = Table<T>;

impl<T: Scalar> Table<T> {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, T::zero())
    }

    pub fn filled(n_states: usize, n_actions: usize, value: T) -> Self {
        Self {
            n_states,
            n_actions,
            data: vec![value; n_states * n_actions],
        }
    }

    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                data.push(f(s, a));
            }
        }
        Self {
            n_states,
            n_actions,
            data,
        }
    }

    /// Builds a table from row-major data. Returns `None` on a length mismatch.
    pub fn from_vec(n_states: usize, n_actions: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == n_states * n_actions).then_some(Self {
            n_states,
            n_actions,
            data,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn row_mut(&mut self, s: usize) -> &mut [T] {
        let n = self.n_actions;
        &mut self.data[s * n..(s + 1) * n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Iterates `(s, a, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let n = self.n_actions;
        self.data.iter().enumerate().map(move |(i, &v)| (i / n, i % n, v))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            n_states: self.n_states,
            n_actions: self.n_actions,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert!(self.same_shape(other), "table shape mismatch");
        Self {
            n_states: self.n_states,
            n_actions: self.n_actions,
            data: self.data.iter().zip(&other.data).map(|(&x, &y)| f(x, y)).collect(),
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_states == other.n_states && self.n_actions == other.n_actions
    }

    /// Largest absolute entrywise difference.
    pub fn sup_diff(&self, other: &Self) -> T {
        assert!(self.same_shape(other), "table shape mismatch");
        sup_diff(&self.data, &other.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Table<T> {
    type Output = T;

    fn index(&self, (s, a): (usize, usize)) -> &T {
        debug_assert!(s < self.n_states && a < self.n_actions);
        &self.data[s * self.n_actions + a]
    }
}

impl<T> IndexMut<(usize, usize)> for Table<T> {
    fn index_mut(&mut self, (s, a): (usize, usize)) -> &mut T {
        debug_assert!(s < self.n_states && a < self.n_actions);
        &mut self.data[s * self.n_actions + a]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_layout() {
        let t = Table::<f64>::from_fn(2, 3, |s, a| (10 * s + a) as f64);
        assert_eq!(t.row(1), &[10.0, 11.0, 12.0]);
        assert_eq!(t[(0, 2)], 2.0);
        let triples: Vec<_> = t.iter().collect();
        assert_eq!(triples[4], (1, 1, 11.0));
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Table::<f64>::from_vec(2, 2, vec![0.0; 3]).is_none());
    }
}
