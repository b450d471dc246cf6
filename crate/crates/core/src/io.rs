//! JSON and JSON-lines file formats.
//!
//! Reals are written with 17 significant digits so every value read back is
//! bit-identical to the one written.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::advancement::{AdvancementSolution, VerificationReport};
use crate::error::{Error, Result};
use crate::estimation::EmpiricalModel;
use crate::mdp::Mdp;
use crate::mincost::{FeatureModel, MinCostSolution, RewardBounds};
use crate::policy::StochasticPolicy;
use crate::scalar::Scalar;
use crate::simulate::Trajectory;
use crate::solve::MceSolution;
use crate::table::Table;

/// Row-sum tolerance applied when loading policies.
pub const POLICY_LOAD_TOL: f64 = 1e-9;

/// Formats a real with 17 significant digits.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_real(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` as compact JSON with full-precision reals.
pub fn to_json<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<S: Serialize + ?Sized>(mut writer: impl Write, value: &S) -> Result<()> {
    writer.write_all(to_json(value)?.as_bytes())?;
    writer.write_all(b"\n")?;
    Ok(())
}

fn sparse<T: Scalar>(table: &Table<T>) -> Vec<(usize, usize, T)> {
    table.iter().collect()
}

fn dense<T: Scalar>(n_states: usize, n_actions: usize, entries: &[(usize, usize, T)], what: &str) -> Result<Table<T>> {
    let mut table = Table::zeros(n_states, n_actions);
    for &(s, a, v) in entries {
        if s >= n_states || a >= n_actions {
            return Err(Error::InvalidInput(format!(
                "{what} entry ({s},{a}) outside {n_states}x{n_actions}"
            )));
        }
        table[(s, a)] = v;
    }
    Ok(table)
}

/// MDP file. Omitted reward entries are zero; terminal states without
/// listed transitions get absorbing self-loops.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpDoc<T> {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: T,
    pub mu0: Vec<T>,
    #[serde(default)]
    pub terminals: Vec<usize>,
    pub transitions: Vec<(usize, usize, usize, T)>,
    #[serde(default)]
    pub rewards: Vec<(usize, usize, T)>,
}

impl<T: Scalar> MdpDoc<T> {
    pub fn from_mdp(mdp: &Mdp<T>) -> Self {
        let na = mdp.n_actions();
        let transitions = mdp
            .transitions()
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(n, p)| (i / na, i % na, n, p)))
            .collect();
        let rewards = mdp.rewards().iter().filter(|&(_, _, r)| r != T::zero()).collect();
        Self {
            n_states: mdp.n_states(),
            n_actions: na,
            gamma: mdp.gamma(),
            mu0: mdp.mu0().to_vec(),
            terminals: mdp.terminals(),
            transitions,
            rewards,
        }
    }

    pub fn into_mdp(self) -> Result<Mdp<T>> {
        let (ns, na) = (self.n_states, self.n_actions);
        let mut builder = Mdp::builder(ns, na).gamma(self.gamma).mu0(self.mu0);
        for &(s, a, n, p) in &self.transitions {
            if s >= ns || a >= na || n >= ns {
                return Err(Error::InvalidInput(format!(
                    "transition ({s},{a},{n}) outside {ns} states x {na} actions"
                )));
            }
            builder = builder.transition(s, a, n, p);
        }
        for &s in &self.terminals {
            let listed = self.transitions.iter().any(|t| t.0 == s);
            builder = if listed {
                builder.terminal_flag(s)
            } else {
                builder.terminal(s)
            };
        }
        let rewards = dense(ns, na, &self.rewards, "reward")?;
        for (s, a, r) in rewards.iter() {
            builder = builder.reward(s, a, r);
        }
        builder.build()
    }
}

/// Policy file. States with no listed entries are read as uniform; other
/// rows are renormalized when within [`POLICY_LOAD_TOL`] of summing to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyDoc<T> {
    pub probs: Vec<(usize, usize, T)>,
}

impl<T: Scalar> PolicyDoc<T> {
    pub fn from_policy(policy: &StochasticPolicy<T>) -> Self {
        Self {
            probs: sparse(policy.probs()),
        }
    }

    pub fn into_policy(self, n_states: usize, n_actions: usize) -> Result<StochasticPolicy<T>> {
        let mut table =
            dense(n_states, n_actions, &self.probs, "policy").map_err(|e| Error::InvalidPolicy(e.to_string()))?;
        let mut listed = vec![false; n_states];
        for &(s, _, _) in &self.probs {
            listed[s] = true;
        }
        let uniform = T::one() / T::from_usize(n_actions).expect("action count fits");
        for (s, _) in listed.iter().enumerate().filter(|(_, &l)| !l) {
            table.row_mut(s).fill(uniform);
        }
        StochasticPolicy::normalized(table, T::of(POLICY_LOAD_TOL))
    }
}

/// Output of the MCE solver: policy, Q-table and convergence data. Readable
/// as a [`PolicyDoc`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MceDoc<T> {
    pub probs: Vec<(usize, usize, T)>,
    pub q: Vec<(usize, usize, T)>,
    pub residual: T,
    pub iterations: usize,
}

impl<T: Scalar> MceDoc<T> {
    pub fn from_solution(sol: &MceSolution<T>) -> Self {
        Self {
            probs: sparse(sol.policy.probs()),
            q: sparse(&sol.q),
            residual: sol.residual,
            iterations: sol.iterations,
        }
    }
}

/// A `beta` file: either a bare array or `{"beta": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaDoc<T> {
    Bare(Vec<T>),
    Wrapped { beta: Vec<T> },
}

impl<T> BetaDoc<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            BetaDoc::Bare(v) | BetaDoc::Wrapped { beta: v } => v,
        }
    }
}

/// Feature file, optionally narrowing the additional-reward bounds globally
/// or per pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureDoc<T> {
    pub omega: Vec<T>,
    pub phi: Vec<T>,
    pub c_min: Vec<T>,
    pub c_max: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<T>,
    /// `[s, a, lower, upper]` entries.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<(usize, usize, T, T)>,
}

impl<T: Scalar> FeatureDoc<T> {
    pub fn from_model(features: &FeatureModel<T>) -> Self {
        Self {
            omega: features.omega().to_vec(),
            phi: features.phi().to_vec(),
            c_min: features.c_min().to_vec(),
            c_max: features.c_max().to_vec(),
            r_min: None,
            r_max: None,
            overrides: Vec::new(),
        }
    }

    pub fn into_model(self) -> Result<(FeatureModel<T>, RewardBounds<T>)> {
        let features = FeatureModel::new(self.omega, self.phi, self.c_min, self.c_max)?;
        let mut bounds = RewardBounds::new(
            self.r_min.unwrap_or_else(|| features.r_min()),
            self.r_max.unwrap_or_else(|| features.r_max()),
        );
        for (s, a, lo, hi) in self.overrides {
            bounds = bounds.with_override(s, a, lo, hi);
        }
        bounds.check_against(&features)?;
        Ok((features, bounds))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VerificationDoc {
    pub max_deviation: f64,
    pub pass: bool,
}

impl From<VerificationReport> for VerificationDoc {
    fn from(r: VerificationReport) -> Self {
        Self {
            max_deviation: r.max_deviation,
            pass: r.pass,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvancementDoc<T> {
    pub beta: Vec<T>,
    pub delta_q: Vec<(usize, usize, T)>,
    pub delta_r: Vec<(usize, usize, T)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationDoc>,
}

impl<T: Scalar> AdvancementDoc<T> {
    pub fn from_solution(sol: &AdvancementSolution<T>, verification: Option<VerificationReport>) -> Self {
        Self {
            beta: sol.beta.clone(),
            delta_q: sparse(&sol.delta_q),
            delta_r: sparse(&sol.delta_r),
            verification: verification.map(Into::into),
        }
    }
}

/// Min-cost solution file. `delta_r` holds the minimum additional reward.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinCostDoc<T> {
    pub beta: Vec<T>,
    pub delta_q: Vec<(usize, usize, T)>,
    pub delta_r: Vec<(usize, usize, T)>,
    pub beta_min: Vec<T>,
    pub beta_max: Vec<T>,
    pub k: Vec<(usize, usize, T)>,
    pub objective: T,
    pub assignments: Vec<(usize, usize, Vec<T>)>,
    pub costs: Vec<(usize, usize, T)>,
    pub total_cost: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationDoc>,
}

impl<T: Scalar> MinCostDoc<T> {
    pub fn from_solution(sol: &MinCostSolution<T>, verification: Option<VerificationReport>) -> Self {
        let na = sol.costs.n_actions();
        let assignments = sol
            .assignments
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_empty())
            .map(|(i, f)| (i / na, i % na, f.clone()))
            .collect();
        Self {
            beta: sol.advancement.beta.clone(),
            delta_q: sparse(&sol.advancement.delta_q),
            delta_r: sparse(&sol.delta_r_star),
            beta_min: sol.beta_min.clone(),
            beta_max: sol.beta_max.clone(),
            k: sparse(&sol.k),
            objective: sol.objective,
            assignments,
            costs: sparse(&sol.costs),
            total_cost: sol.total_cost,
            verification: verification.map(Into::into),
        }
    }
}

/// Estimated transitions in MDP layout, with raw counts and the pairs never
/// observed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalModelDoc<T> {
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<(usize, usize, usize, T)>,
    pub counts: Vec<(usize, usize, usize, u64)>,
    pub unobserved: Vec<(usize, usize)>,
}

impl<T: Scalar> EmpiricalModelDoc<T> {
    /// `terminals` are left out of the unobserved list.
    pub fn from_model(model: &EmpiricalModel<T>, terminals: &[usize]) -> Self {
        let mut transitions = Vec::new();
        let mut counts = Vec::new();
        for s in 0..model.n_states() {
            for a in 0..model.n_actions() {
                transitions.extend(model.successors(s, a).iter().map(|&(n, p)| (s, a, n, p)));
                counts.extend(model.counts(s, a).iter().map(|(&n, &c)| (s, a, n, c)));
            }
        }
        Self {
            n_states: model.n_states(),
            n_actions: model.n_actions(),
            transitions,
            counts,
            unobserved: model.unobserved(terminals),
        }
    }
}

/// Reads one trajectory per line, each a JSON array of `[s, a]` pairs.
/// Blank lines are skipped.
pub fn read_trajectories<T: Scalar>(reader: impl BufRead) -> Result<Vec<Trajectory<T>>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let steps: Vec<(usize, usize)> =
            serde_json::from_str(&line).map_err(|e| Error::InvalidInput(format!("trajectory line {}: {e}", i + 1)))?;
        out.push(Trajectory::from_steps(steps));
    }
    Ok(out)
}

pub fn write_trajectories<T: Scalar>(mut writer: impl Write, trajectories: &[Trajectory<T>]) -> Result<()> {
    for t in trajectories {
        serde_json::to_writer(&mut writer, &t.steps)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
