//! Grid world with colored objects and a rewarding destination, plus the
//! two experiment runners built on it.
//!
//! Cells are numbered row-major, `cell = y * width + x`. Actions are stay,
//! up, right, down, left. A move succeeds with probability `1 - slip` and
//! otherwise goes to one of the two lateral neighbors; moves off the grid
//! leave the agent in place. Entering a different cell pays that cell's
//! object or destination reward. Every action at the destination leads to
//! the absorbing terminal state, numbered `width * height`.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    advancement_error, advancement_mae, sample_based_min_reward_with_bounds, Fallback, ModelSkeleton,
};
use crate::io::format_real;
use crate::mdp::Mdp;
use crate::mincost::{min_reward_solution_with_bounds, FeatureModel, MinCostOptions, RewardBounds};
use crate::policy::StochasticPolicy;
use crate::scalar::Scalar;
use crate::simulate::simulate;
use crate::solve::{mce_policy, SolverOptions};

pub const N_ACTIONS: usize = 5;

const MOVES: [(i64, i64); N_ACTIONS] = [(0, 0), (0, -1), (1, 0), (0, 1), (-1, 0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPlacement {
    pub cell: usize,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectWorldSpec {
    pub width: usize,
    pub height: usize,
    pub objects: Vec<ObjectPlacement>,
    pub color_rewards: BTreeMap<String, f64>,
    pub destination: usize,
    pub destination_reward: f64,
    pub slip: f64,
    pub gamma: f64,
    /// Seeds the layout of [`ObjectWorldSpec::random`] and the experiments.
    pub seed: u64,
}

impl Default for ObjectWorldSpec {
    /// The 9x5 world with 2 green and 3 red objects.
    fn default() -> Self {
        Self::random(9, 5, 2, 3, 7)
    }
}

impl ObjectWorldSpec {
    /// Places the destination and the objects uniformly at random in
    /// distinct cells.
    pub fn random(width: usize, height: usize, green: usize, red: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cells: Vec<usize> = (0..width * height).collect();
        cells.shuffle(&mut rng);
        let destination = cells.first().copied().unwrap_or(0);
        let place = |cells: &[usize], color: &str| -> Vec<ObjectPlacement> {
            cells
                .iter()
                .map(|&cell| ObjectPlacement {
                    cell,
                    color: color.into(),
                })
                .collect()
        };
        let rest = cells.get(1..).unwrap_or(&[]);
        let green = green.min(rest.len());
        let red = red.min(rest.len() - green);
        let mut objects = place(&rest[..green], "green");
        objects.extend(place(&rest[green..green + red], "red"));
        Self {
            width,
            height,
            objects,
            color_rewards: BTreeMap::from([("green".into(), 1.0), ("red".into(), -1.0)]),
            destination,
            destination_reward: 5.0,
            slip: 0.3,
            gamma: 0.95,
            seed,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn terminal(&self) -> usize {
        self.n_cells()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_cells();
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if n < 2 {
            return bad(format!("grid {}x{} has fewer than 2 cells", self.width, self.height));
        }
        if !(0.0..1.0).contains(&self.slip) {
            return bad(format!("slip {} is outside [0, 1)", self.slip));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} is outside (0, 1]", self.gamma));
        }
        if self.destination >= n {
            return bad(format!("destination {} is outside the grid", self.destination));
        }
        if !self.destination_reward.is_finite() || self.color_rewards.values().any(|r| !r.is_finite()) {
            return bad("rewards must be finite".into());
        }
        let mut seen = vec![false; n];
        for o in &self.objects {
            if o.cell >= n {
                return bad(format!("object cell {} is outside the grid", o.cell));
            }
            if o.cell == self.destination {
                return bad(format!("object cell {} is the destination", o.cell));
            }
            if std::mem::replace(&mut seen[o.cell], true) {
                return bad(format!("cell {} holds two objects", o.cell));
            }
            if !self.color_rewards.contains_key(&o.color) {
                return bad(format!("color {:?} has no reward", o.color));
            }
        }
        Ok(())
    }

    fn step(&self, cell: usize, (dx, dy): (i64, i64)) -> usize {
        let (x, y) = ((cell % self.width) as i64, (cell / self.width) as i64);
        let (nx, ny) = (x + dx, y + dy);
        if (0..self.width as i64).contains(&nx) && (0..self.height as i64).contains(&ny) {
            ny as usize * self.width + nx as usize
        } else {
            cell
        }
    }

    /// Reward for entering `cell`.
    fn entry_reward(&self, cell: usize) -> f64 {
        if cell == self.destination {
            return self.destination_reward;
        }
        self.objects
            .iter()
            .find(|o| o.cell == cell)
            .map_or(0.0, |o| self.color_rewards[&o.color])
    }
}

/// Builds the object-world MDP, starting uniformly over non-destination cells.
pub fn build_object_world<T: Scalar>(spec: &ObjectWorldSpec) -> Result<Mdp<T>> {
    spec.validate()?;
    let n = spec.n_cells();
    let terminal = spec.terminal();
    let mut builder = Mdp::builder(n + 1, N_ACTIONS).gamma(T::of(spec.gamma));
    for cell in 0..n {
        for (a, &dir) in MOVES.iter().enumerate() {
            if cell == spec.destination {
                builder = builder.transition(cell, a, terminal, T::one());
                continue;
            }
            let outcomes: Vec<(usize, f64)> = if a == 0 || spec.slip == 0.0 {
                vec![(spec.step(cell, dir), 1.0)]
            } else {
                let (dx, dy) = dir;
                vec![
                    (spec.step(cell, dir), 1.0 - spec.slip),
                    (spec.step(cell, (dy, dx)), spec.slip / 2.0),
                    (spec.step(cell, (-dy, -dx)), spec.slip / 2.0),
                ]
            };
            let mut reward = 0.0;
            for (next, p) in outcomes {
                builder = builder.transition(cell, a, next, T::of(p));
                if next != cell {
                    reward += p * spec.entry_reward(next);
                }
            }
            builder = builder.reward(cell, a, T::of(reward));
        }
    }
    let mut mu0 = vec![T::zero(); n + 1];
    let weight = T::one() / T::from_usize(n - 1).expect("cell count fits");
    for (cell, m) in mu0.iter_mut().enumerate().take(n) {
        if cell != spec.destination {
            *m = weight;
        }
    }
    builder.terminal(terminal).mu0(mu0).build()
}

/// Features used by the experiments when none are given: two features
/// with efficiencies 2 and 1, achievable additional reward `[-3, 24]`.
pub fn default_features<T: Scalar>() -> FeatureModel<T> {
    let v = |xs: [f64; 2]| xs.iter().map(|&x| T::of(x)).collect::<Vec<_>>();
    FeatureModel::new(v([2.0, 1.0]), v([1.0, 1.0]), v([-1.0, -1.0]), v([4.0, 16.0])).expect("valid default features")
}

/// The MCE policy after adding uniform noise in `[-scale, scale]` to every
/// nonterminal reward.
pub fn perturbed_mce_target<T: Scalar>(
    mdp: &Mdp<T>,
    scale: f64,
    seed: u64,
    solver: &SolverOptions,
) -> Result<StochasticPolicy<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rewards = mdp.rewards().clone();
    for s in mdp.nonterminal_states() {
        for r in rewards.row_mut(s) {
            *r = *r + T::of(rng.gen_range(-scale..=scale));
        }
    }
    Ok(mce_policy(&mdp.with_rewards(rewards)?, solver)?.policy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions {
    pub mincost: MinCostOptions,
    /// Longest simulated trajectory, in state-action pairs.
    pub max_len: usize,
    pub fallback: Fallback,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            mincost: MinCostOptions::default(),
            max_len: 200,
            fallback: Fallback::UniformSuccessor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyRow<T> {
    pub count: usize,
    pub seed: u64,
    /// `None` when the estimated model makes the instance infeasible.
    pub errors: Option<AccuracyErrors<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyErrors<T> {
    pub sup_err: T,
    pub mae: T,
}

/// Compares the sample-based minimum additional reward against the exact
/// one for every `(count, seed)` pair. Trajectories are simulated under the
/// agent's MCE policy with seed `seed`, so smaller counts see a prefix of
/// the data seen by larger ones. Rows are ordered by count, then seed.
pub fn run_accuracy_experiment<T: Scalar>(
    spec: &ObjectWorldSpec,
    target: &StochasticPolicy<T>,
    features: &FeatureModel<T>,
    bounds: &RewardBounds<T>,
    counts: &[usize],
    seeds: &[u64],
    options: &ExperimentOptions,
) -> Result<Vec<AccuracyRow<T>>> {
    let mdp = build_object_world::<T>(spec)?;
    let exact = min_reward_solution_with_bounds(&mdp, target, features, bounds, &options.mincost)?;
    let agent = mce_policy(&mdp, &options.mincost.advancement.solver)?.policy;
    let known = ModelSkeleton::of(&mdp);
    let tasks: Vec<(usize, u64)> = counts
        .iter()
        .flat_map(|&c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    tasks
        .into_par_iter()
        .map(|(count, seed)| {
            let data = simulate(&mdp, &agent, count, seed, options.max_len);
            let est = match sample_based_min_reward_with_bounds(
                &data,
                &known,
                target,
                features,
                bounds,
                options.fallback,
                &options.mincost,
            ) {
                Ok(est) => est,
                Err(Error::NoValidSolution { .. } | Error::RewardOutOfBounds { .. }) => {
                    return Ok(AccuracyRow {
                        count,
                        seed,
                        errors: None,
                    })
                }
                Err(e) => return Err(e),
            };
            Ok(AccuracyRow {
                count,
                seed,
                errors: Some(AccuracyErrors {
                    sup_err: advancement_error(&est, &exact)?,
                    mae: advancement_mae(&est, &exact, &mdp)?,
                }),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostCurveRow<T> {
    pub r_min: T,
    /// `None` when the lower bound makes the instance infeasible.
    pub solved: Option<CostPoint<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPoint<T> {
    pub objective: T,
    pub total_cost: T,
}

/// Solves the min-cost problem once per lower bound, keeping the upper
/// bound of `features`. Infeasible bounds yield rows without a solution.
pub fn run_cost_curve_experiment<T: Scalar>(
    spec: &ObjectWorldSpec,
    target: &StochasticPolicy<T>,
    features: &FeatureModel<T>,
    r_min_values: &[T],
    options: &MinCostOptions,
) -> Result<Vec<CostCurveRow<T>>> {
    let mdp = build_object_world::<T>(spec)?;
    r_min_values
        .par_iter()
        .map(|&r_min| {
            let bounds = RewardBounds::new(r_min, features.r_max());
            match min_reward_solution_with_bounds(&mdp, target, features, &bounds, options) {
                Ok(sol) => Ok(CostCurveRow {
                    r_min,
                    solved: Some(CostPoint {
                        objective: sol.objective,
                        total_cost: sol.total_cost,
                    }),
                }),
                Err(Error::NoValidSolution { .. } | Error::RewardOutOfBounds { .. }) => {
                    Ok(CostCurveRow { r_min, solved: None })
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

fn csv_writer(writer: impl Write) -> csv::Writer<impl Write> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

/// Columns `count,seed,sup_err,mae,status`; rows with an infeasible
/// estimate leave the error fields empty.
pub fn write_accuracy_csv<T: Scalar>(writer: impl Write, rows: &[AccuracyRow<T>]) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["count", "seed", "sup_err", "mae", "status"])
        .map_err(csv_err)?;
    for r in rows {
        let (sup_err, mae, status) = match r.errors {
            Some(e) => (format_real(e.sup_err.as_f64()), format_real(e.mae.as_f64()), "ok"),
            None => (String::new(), String::new(), "infeasible"),
        };
        w.write_record([r.count.to_string(), r.seed.to_string(), sup_err, mae, status.into()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `r_min,objective,total_cost,status`; infeasible rows leave the
/// numeric fields empty.
pub fn write_cost_curve_csv<T: Scalar>(writer: impl Write, rows: &[CostCurveRow<T>]) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["r_min", "objective", "total_cost", "status"])
        .map_err(csv_err)?;
    for r in rows {
        let (objective, total_cost, status) = match r.solved {
            Some(p) => (
                format_real(p.objective.as_f64()),
                format_real(p.total_cost.as_f64()),
                "ok",
            ),
            None => (String::new(), String::new(), "infeasible"),
        };
        w.write_record([format_real(r.r_min.as_f64()), objective, total_cost, status.into()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate_mdp;

    fn corridor(slip: f64) -> ObjectWorldSpec {
        ObjectWorldSpec {
            width: 2,
            height: 1,
            objects: vec![],
            destination: 1,
            slip,
            ..ObjectWorldSpec::default()
        }
    }

    #[test]
    fn default_world_shape() {
        let spec = ObjectWorldSpec::default();
        assert_eq!(spec.objects.len(), 5);
        let mdp = build_object_world::<f64>(&spec).unwrap();
        assert_eq!((mdp.n_states(), mdp.n_actions()), (46, 5));
        assert_eq!(mdp.terminals(), vec![45]);
        assert!(validate_mdp(&mdp).is_ok());
    }

    #[test]
    fn layout_is_reproducible() {
        assert_eq!(
            ObjectWorldSpec::random(9, 5, 2, 3, 11),
            ObjectWorldSpec::random(9, 5, 2, 3, 11)
        );
        assert_ne!(
            ObjectWorldSpec::random(9, 5, 2, 3, 11),
            ObjectWorldSpec::random(9, 5, 2, 3, 12)
        );
    }

    #[test]
    fn corridor_prefers_moving_right() {
        let mdp = build_object_world::<f64>(&corridor(0.0)).unwrap();
        assert_eq!(mdp.n_states(), 3);
        let pi = mce_policy(&mdp, &SolverOptions::default()).unwrap().policy;
        let right = pi.prob(0, 2);
        assert!((0..5).filter(|&a| a != 2).all(|a| pi.prob(0, a) < right));
    }

    #[test]
    fn no_slip_means_point_masses() {
        let mdp = build_object_world::<f64>(&ObjectWorldSpec {
            slip: 0.0,
            ..ObjectWorldSpec::default()
        })
        .unwrap();
        assert!(mdp.transitions().iter().all(|row| row.len() == 1 && row[0].1 == 1.0));
    }

    #[test]
    fn slip_goes_to_lateral_neighbors() {
        let spec = ObjectWorldSpec {
            width: 3,
            height: 3,
            objects: vec![],
            destination: 0,
            ..ObjectWorldSpec::default()
        };
        let mdp = build_object_world::<f64>(&spec).unwrap();
        // Centre cell 4 moving up: 1 with 0.7, laterals 5 and 3 with 0.15.
        let mut row = mdp.successors(4, 1).to_vec();
        row.sort_by_key(|e| e.0);
        assert_eq!(row, vec![(1, 0.7), (3, 0.15), (5, 0.15)]);
        // Corner 8 moving right stays put with 0.7 and hits the wall below.
        let p_stay: f64 = mdp.successors(8, 2).iter().filter(|e| e.0 == 8).map(|e| e.1).sum();
        assert!((p_stay - 0.85).abs() < 1e-12);
    }

    #[test]
    fn entry_rewards() {
        let spec = ObjectWorldSpec {
            width: 3,
            height: 1,
            objects: vec![ObjectPlacement {
                cell: 1,
                color: "red".into(),
            }],
            destination: 2,
            slip: 0.0,
            ..ObjectWorldSpec::default()
        };
        let mdp = build_object_world::<f64>(&spec).unwrap();
        assert_eq!(mdp.reward(0, 2), -1.0);
        assert_eq!(mdp.reward(1, 2), 5.0);
        assert_eq!(mdp.reward(1, 0), 0.0);
        assert_eq!(mdp.reward(2, 0), 0.0);
        assert_eq!(mdp.successors(2, 3), &[(3, 1.0)]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = ObjectWorldSpec::default();
        let dest_on_object = ObjectWorldSpec {
            destination: base.objects[0].cell,
            ..base.clone()
        };
        assert!(matches!(dest_on_object.validate(), Err(Error::InvalidSpec(_))));
        assert!(ObjectWorldSpec {
            slip: 1.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ObjectWorldSpec {
            width: 1,
            height: 1,
            objects: vec![],
            destination: 0,
            ..base.clone()
        }
        .validate()
        .is_err());
        let mut dup = base.clone();
        dup.objects[1].cell = dup.objects[0].cell;
        assert!(dup.validate().is_err());
        let mut unknown = base;
        unknown.objects[0].color = "blue".into();
        assert!(unknown.validate().is_err());
    }

    #[test]
    fn spec_json_round_trip_and_defaults() {
        let spec = ObjectWorldSpec::default();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ObjectWorldSpec>(&text).unwrap(), spec);
        let partial: ObjectWorldSpec = serde_json::from_str(r#"{"slip": 0.1}"#).unwrap();
        assert_eq!(partial.slip, 0.1);
        assert_eq!(partial.width, 9);
    }

    #[test]
    fn cost_curve_flags_infeasible_rows() {
        let spec = corridor(0.0);
        let mdp = build_object_world::<f64>(&spec).unwrap();
        let target = StochasticPolicy::uniform(mdp.n_states(), N_ACTIONS);
        let rows = run_cost_curve_experiment(
            &spec,
            &target,
            &default_features(),
            &[-3.0, 7.9],
            &MinCostOptions::default(),
        )
        .unwrap();
        assert!(rows[0].solved.is_some());
        assert!(rows[1].solved.is_none());
        let mut buf = Vec::new();
        write_cost_curve_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r_min,objective,total_cost,status\n"));
        assert!(text.trim_end().ends_with(",,infeasible"));
    }

    #[test]
    fn accuracy_rows_are_ordered_and_deterministic() {
        let spec = corridor(0.0);
        let target = StochasticPolicy::<f64>::uniform(3, N_ACTIONS);
        let fm = default_features();
        let bounds = RewardBounds::from_features(&fm);
        let opts = ExperimentOptions::default();
        let run = || run_accuracy_experiment(&spec, &target, &fm, &bounds, &[5, 400], &[1, 2], &opts).unwrap();
        let rows = run();
        assert_eq!(rows, run());
        let keys: Vec<_> = rows.iter().map(|r| (r.count, r.seed)).collect();
        assert_eq!(keys, vec![(5, 1), (5, 2), (400, 1), (400, 2)]);
        // Deterministic dynamics with every pair observed: exact recovery.
        let sup = |i: usize| rows[i].errors.expect("feasible estimate").sup_err;
        assert!(sup(2) < 1e-9 && sup(3) < 1e-9, "{rows:?}");
    }
}
