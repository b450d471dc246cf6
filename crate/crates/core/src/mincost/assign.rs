//! Assignment stage: spreading an additional reward over features at
//! minimum implementation cost.
//!
//! Feature `i` delivers `ω_i` reward and costs `φ_i` per unit, with its cost
//! `φ_i ΔF_i` boxed in `[c_min_i, c_max_i]`. Every feature starts at its
//! minimum cost, which yields the baseline reward `r_min`; the remaining
//! reward is filled greedily in descending `ω_i / φ_i` order, feature `i`
//! contributing at most `(ω_i / φ_i)(c_max_i - c_min_i)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result, Side};
use crate::scalar::Scalar;

/// Linear reward/cost model of the features that can be adjusted.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel<T> {
    omega: Vec<T>,
    phi: Vec<T>,
    c_min: Vec<T>,
    c_max: Vec<T>,
    order: Vec<usize>,
}

impl<T: Scalar> FeatureModel<T> {
    pub fn new(omega: Vec<T>, phi: Vec<T>, c_min: Vec<T>, c_max: Vec<T>) -> Result<Self> {
        let n = omega.len();
        if n == 0 {
            return Err(Error::InvalidFeatures("at least one feature is required".into()));
        }
        if phi.len() != n || c_min.len() != n || c_max.len() != n {
            return Err(Error::InvalidFeatures(format!(
                "length mismatch: omega {}, phi {}, c_min {}, c_max {}",
                n,
                phi.len(),
                c_min.len(),
                c_max.len()
            )));
        }
        for i in 0..n {
            let vals = [omega[i], phi[i], c_min[i], c_max[i]];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidFeatures(format!("feature {i} has a non-finite entry")));
            }
            if !(omega[i] / phi[i] > T::zero()) {
                return Err(Error::InvalidFeatures(format!(
                    "feature {i} has omega/phi = {}/{}, must be positive",
                    omega[i], phi[i]
                )));
            }
            if c_min[i] > c_max[i] {
                return Err(Error::InvalidFeatures(format!(
                    "feature {i} has c_min {} > c_max {}",
                    c_min[i], c_max[i]
                )));
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        // Stable: equal efficiencies keep index order.
        order.sort_by(|&i, &j| {
            let (ei, ej) = (omega[i] / phi[i], omega[j] / phi[j]);
            ej.partial_cmp(&ei).expect("finite efficiencies")
        });
        Ok(Self {
            omega,
            phi,
            c_min,
            c_max,
            order,
        })
    }

    pub fn n_features(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    pub fn c_min(&self) -> &[T] {
        &self.c_min
    }

    pub fn c_max(&self) -> &[T] {
        &self.c_max
    }

    /// Reward per unit cost of feature `i`.
    pub fn efficiency(&self, i: usize) -> T {
        self.omega[i] / self.phi[i]
    }

    /// Feature indices by descending efficiency, ties by index.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Reward feature `i` can add above its minimum-cost contribution.
    pub fn capacity(&self, i: usize) -> T {
        self.efficiency(i) * (self.c_max[i] - self.c_min[i])
    }

    /// Smallest achievable additional reward, `Σ_i (ω_i/φ_i) c_min_i`.
    pub fn r_min(&self) -> T {
        (0..self.n_features()).map(|i| self.efficiency(i) * self.c_min[i]).sum()
    }

    /// Largest achievable additional reward, `Σ_i (ω_i/φ_i) c_max_i`.
    pub fn r_max(&self) -> T {
        (0..self.n_features()).map(|i| self.efficiency(i) * self.c_max[i]).sum()
    }

    /// Cost of the assignment `delta_f`, `Σ_i φ_i ΔF_i`.
    pub fn cost_of(&self, delta_f: &[T]) -> T {
        self.phi.iter().zip(delta_f).map(|(&p, &f)| p * f).sum()
    }

    /// Reward of the assignment `delta_f`, `Σ_i ω_i ΔF_i`.
    pub fn reward_of(&self, delta_f: &[T]) -> T {
        self.omega.iter().zip(delta_f).map(|(&w, &f)| w * f).sum()
    }

    fn check_achievable(&self, delta_r: T) -> Result<()> {
        let (lo, hi) = (self.r_min(), self.r_max());
        if !(delta_r >= lo) {
            return Err(Error::NotAchievable {
                value: delta_r.as_f64(),
                bound: lo.as_f64(),
                side: Side::Lower,
            });
        }
        if !(delta_r <= hi) {
            return Err(Error::NotAchievable {
                value: delta_r.as_f64(),
                bound: hi.as_f64(),
                side: Side::Upper,
            });
        }
        Ok(())
    }

    /// Reward filled into each feature above the baseline, indexed by feature.
    fn fills(&self, delta_r: T) -> Vec<T> {
        let mut remaining = delta_r - self.r_min();
        let mut fills = vec![T::zero(); self.n_features()];
        for &i in &self.order {
            let fill = remaining.min(self.capacity(i)).max(T::zero());
            fills[i] = fill;
            remaining = remaining - fill;
        }
        fills
    }
}

/// Minimum cost of providing `delta_r` additional reward.
pub fn min_cost_of_reward<T: Scalar>(delta_r: T, features: &FeatureModel<T>) -> Result<T> {
    features.check_achievable(delta_r)?;
    let baseline: T = features.c_min.iter().copied().sum();
    let fills = features.fills(delta_r);
    Ok(fills
        .iter()
        .enumerate()
        .fold(baseline, |acc, (i, &f)| acc + f / features.efficiency(i)))
}

/// Greedy min-cost feature assignment `ΔF` for `delta_r`.
pub fn assign_features<T: Scalar>(delta_r: T, features: &FeatureModel<T>) -> Result<Vec<T>> {
    features.check_achievable(delta_r)?;
    let fills = features.fills(delta_r);
    Ok((0..features.n_features())
        .map(|i| (features.efficiency(i) * features.c_min[i] + fills[i]) / features.omega[i])
        .collect())
}

/// Additional-reward interval per state-action pair.
///
/// Defaults to the global `[r_min, r_max]` of a feature model; individual
/// pairs may be narrowed.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardBounds<T> {
    pub r_min: T,
    pub r_max: T,
    overrides: BTreeMap<(usize, usize), (T, T)>,
}

impl<T: Scalar> RewardBounds<T> {
    pub fn new(r_min: T, r_max: T) -> Self {
        Self {
            r_min,
            r_max,
            overrides: BTreeMap::new(),
        }
    }

    pub fn from_features(features: &FeatureModel<T>) -> Self {
        Self::new(features.r_min(), features.r_max())
    }

    pub fn with_override(mut self, s: usize, a: usize, lower: T, upper: T) -> Self {
        self.overrides.insert((s, a), (lower, upper));
        self
    }

    pub fn overrides(&self) -> impl Iterator<Item = ((usize, usize), (T, T))> + '_ {
        self.overrides.iter().map(|(&k, &v)| (k, v))
    }

    pub fn lower(&self, s: usize, a: usize) -> T {
        self.overrides.get(&(s, a)).map_or(self.r_min, |b| b.0)
    }

    pub fn upper(&self, s: usize, a: usize) -> T {
        self.overrides.get(&(s, a)).map_or(self.r_max, |b| b.1)
    }

    /// Every interval must be nonempty and lie inside the achievable range
    /// of `features`.
    pub fn check_against(&self, features: &FeatureModel<T>) -> Result<()> {
        let (lo, hi) = (features.r_min(), features.r_max());
        let intervals = std::iter::once(((usize::MAX, usize::MAX), (self.r_min, self.r_max))).chain(self.overrides());
        for ((s, a), (l, u)) in intervals {
            let at = if s == usize::MAX {
                "global bounds".to_string()
            } else {
                format!("bounds at ({s},{a})")
            };
            if !(l <= u) {
                return Err(Error::InvalidFeatures(format!("{at} are empty: [{l}, {u}]")));
            }
            if l < lo || u > hi {
                return Err(Error::InvalidFeatures(format!(
                    "{at} [{l}, {u}] leave the achievable range [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}
