//! Finite MDP representation and structural validation.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{sum_tolerance, Scalar};
use crate::table::Table;

/// Tolerance on probability-vector normalization.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// A finite MDP with sparse transitions.
///
/// Terminal states are absorbing with zero reward. Instances built through
/// [`Mdp::new`] or [`MdpBuilder::build`] satisfy every structural invariant
/// checked by [`validate_mdp`].
#[derive(Debug, Clone)]
pub struct Mdp<T> {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<(usize, T)>>,
    rewards: Table<T>,
    mu0: Vec<T>,
    gamma: T,
    terminal: Vec<bool>,
}

impl<T: Scalar> Mdp<T> {
    /// Builds and validates an MDP. `transitions` is indexed by `s * n_actions + a`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<(usize, T)>>,
        rewards: Table<T>,
        mu0: Vec<T>,
        gamma: T,
        terminals: &[usize],
    ) -> Result<Self> {
        let mdp = Self::new_unchecked(n_states, n_actions, transitions, rewards, mu0, gamma, terminals);
        let report = validate_mdp(&mdp);
        if report.is_ok() {
            Ok(mdp)
        } else {
            Err(Error::InvalidMdp(report))
        }
    }

    /// Assembles an MDP without checking invariants. Out-of-range terminal
    /// indices are kept for [`validate_mdp`] to report.
    pub fn new_unchecked(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<(usize, T)>>,
        rewards: Table<T>,
        mu0: Vec<T>,
        gamma: T,
        terminals: &[usize],
    ) -> Self {
        let mut terminal = vec![false; n_states.max(terminals.iter().map(|&s| s + 1).max().unwrap_or(0))];
        for &s in terminals {
            terminal[s] = true;
        }
        Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            mu0,
            gamma,
            terminal,
        }
    }

    pub fn builder(n_states: usize, n_actions: usize) -> MdpBuilder<T> {
        MdpBuilder::new(n_states, n_actions)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn mu0(&self) -> &[T] {
        &self.mu0
    }

    pub fn rewards(&self) -> &Table<T> {
        &self.rewards
    }

    pub fn reward(&self, s: usize, a: usize) -> T {
        self.rewards[(s, a)]
    }

    pub fn successors(&self, s: usize, a: usize) -> &[(usize, T)] {
        &self.transitions[s * self.n_actions + a]
    }

    /// Transition lists indexed by `s * n_actions + a`.
    pub fn transitions(&self) -> &[Vec<(usize, T)>] {
        &self.transitions
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal.get(s).copied().unwrap_or(false)
    }

    pub fn terminals(&self) -> Vec<usize> {
        (0..self.terminal.len()).filter(|&s| self.terminal[s]).collect()
    }

    pub fn nonterminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_states).filter(move |&s| !self.is_terminal(s))
    }

    /// `Σ_{s'} T(s'|s,a) f(s')`.
    pub fn expect(&self, s: usize, a: usize, f: impl Fn(usize) -> T) -> T {
        self.successors(s, a)
            .iter()
            .fold(T::zero(), |acc, &(next, p)| acc + p * f(next))
    }

    /// Same MDP with a different reward table. Terminal rows must stay zero.
    pub fn with_rewards(&self, rewards: Table<T>) -> Result<Self> {
        let mut mdp = self.clone();
        mdp.rewards = rewards;
        let report = validate_mdp(&mdp);
        if report.is_ok() {
            Ok(mdp)
        } else {
            Err(Error::InvalidMdp(report))
        }
    }

    /// Same MDP with a different initial distribution.
    pub fn with_mu0(&self, mu0: Vec<T>) -> Result<Self> {
        let mut mdp = self.clone();
        mdp.mu0 = mu0;
        let report = validate_mdp(&mdp);
        if report.is_ok() {
            Ok(mdp)
        } else {
            Err(Error::InvalidMdp(report))
        }
    }
}

/// Incremental MDP construction. Repeated transition entries for the same
/// `(s, a, s')` are summed.
#[derive(Debug, Clone)]
pub struct MdpBuilder<T> {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<(usize, T)>>,
    rewards: Table<T>,
    mu0: Option<Vec<T>>,
    gamma: T,
    terminals: Vec<usize>,
}

impl<T: Scalar> MdpBuilder<T> {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            transitions: vec![Vec::new(); n_states * n_actions],
            rewards: Table::zeros(n_states, n_actions),
            mu0: None,
            gamma: T::one(),
            terminals: Vec::new(),
        }
    }

    /// Adds probability mass `p` to `T(next | s, a)`. Out-of-range `s` or `a`
    /// are ignored here and surface as a validation failure at build time.
    pub fn transition(mut self, s: usize, a: usize, next: usize, p: T) -> Self {
        if s < self.n_states && a < self.n_actions {
            let row = &mut self.transitions[s * self.n_actions + a];
            match row.iter_mut().find(|(n, _)| *n == next) {
                Some(entry) => entry.1 = entry.1 + p,
                None => row.push((next, p)),
            }
        } else {
            self.terminals.push(usize::MAX);
        }
        self
    }

    pub fn reward(mut self, s: usize, a: usize, r: T) -> Self {
        if s < self.n_states && a < self.n_actions {
            self.rewards[(s, a)] = r;
        } else {
            self.terminals.push(usize::MAX);
        }
        self
    }

    pub fn mu0(mut self, mu0: Vec<T>) -> Self {
        self.mu0 = Some(mu0);
        self
    }

    /// Point-mass initial distribution on `s`.
    pub fn start(mut self, s: usize) -> Self {
        let mut mu0 = vec![T::zero(); self.n_states];
        if s < self.n_states {
            mu0[s] = T::one();
        }
        self.mu0 = Some(mu0);
        self
    }

    pub fn gamma(mut self, gamma: T) -> Self {
        self.gamma = gamma;
        self
    }

    /// Marks `s` terminal and installs its absorbing self-loop for every action.
    pub fn terminal(mut self, s: usize) -> Self {
        self.terminals.push(s);
        if s < self.n_states {
            for a in 0..self.n_actions {
                self.transitions[s * self.n_actions + a] = vec![(s, T::one())];
            }
        }
        self
    }

    /// Marks `s` terminal without touching its transitions.
    pub fn terminal_flag(mut self, s: usize) -> Self {
        self.terminals.push(s);
        self
    }

    fn assemble(self) -> Mdp<T> {
        let mu0 = self.mu0.unwrap_or_else(|| {
            let mut v = vec![T::zero(); self.n_states];
            if let Some(first) = v.first_mut() {
                *first = T::one();
            }
            v
        });
        let bad_index = self.terminals.contains(&usize::MAX);
        let terminals: Vec<usize> = self.terminals.into_iter().filter(|&s| s != usize::MAX).collect();
        let mut mdp = Mdp::new_unchecked(
            self.n_states,
            self.n_actions,
            self.transitions,
            self.rewards,
            mu0,
            self.gamma,
            &terminals,
        );
        if bad_index {
            // Poison the shape so validation reports the out-of-range entry.
            mdp.transitions.push(Vec::new());
        }
        mdp
    }

    pub fn validate(self) -> ValidationReport {
        validate_mdp(&self.assemble())
    }

    pub fn build(self) -> Result<Mdp<T>> {
        let mdp = self.assemble();
        let report = validate_mdp(&mdp);
        if report.is_ok() {
            Ok(mdp)
        } else {
            Err(Error::InvalidMdp(report))
        }
    }
}

/// One failed structural invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptySpace {
        n_states: usize,
        n_actions: usize,
    },
    Shape(String),
    GammaOutOfRange(f64),
    SuccessorOutOfRange {
        state: usize,
        action: usize,
        next: usize,
    },
    NegativeProbability {
        state: usize,
        action: usize,
        next: usize,
        prob: f64,
    },
    RowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    NonFiniteReward {
        state: usize,
        action: usize,
    },
    Mu0Negative {
        state: usize,
        mass: f64,
    },
    Mu0Sum(f64),
    TerminalOutOfRange(usize),
    TerminalNotAbsorbing {
        state: usize,
        action: usize,
    },
    TerminalReward {
        state: usize,
        action: usize,
        reward: f64,
    },
    CannotReachTerminal(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySpace { n_states, n_actions } => {
                write!(
                    f,
                    "empty state or action space ({n_states} states, {n_actions} actions)"
                )
            }
            Violation::Shape(msg) => write!(f, "{msg}"),
            Violation::GammaOutOfRange(g) => write!(f, "gamma {g} is outside (0, 1]"),
            Violation::SuccessorOutOfRange { state, action, next } => {
                write!(f, "row ({state},{action}) has successor {next} out of range")
            }
            Violation::NegativeProbability {
                state,
                action,
                next,
                prob,
            } => {
                write!(f, "row ({state},{action}) has probability {prob} for successor {next}")
            }
            Violation::RowSum { state, action, sum } => write!(f, "row ({state},{action}) sums to {sum}"),
            Violation::NonFiniteReward { state, action } => write!(f, "reward ({state},{action}) is not finite"),
            Violation::Mu0Negative { state, mass } => write!(f, "mu0[{state}] = {mass} is negative"),
            Violation::Mu0Sum(sum) => write!(f, "mu0 sums to {sum}"),
            Violation::TerminalOutOfRange(s) => write!(f, "terminal {s} is out of range"),
            Violation::TerminalNotAbsorbing { state, action } => {
                write!(f, "terminal {state} is not absorbing under action {action}")
            }
            Violation::TerminalReward { state, action, reward } => {
                write!(f, "terminal {state} has reward {reward} under action {action}")
            }
            Violation::CannotReachTerminal(s) => write!(f, "state {s} cannot reach terminal"),
        }
    }
}

/// Every invariant violation found in an MDP. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every structural invariant of `mdp` and reports all failures.
pub fn validate_mdp<T: Scalar>(mdp: &Mdp<T>) -> ValidationReport {
    let mut out = Vec::new();
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    if ns == 0 || na == 0 {
        out.push(Violation::EmptySpace {
            n_states: ns,
            n_actions: na,
        });
        return ValidationReport { violations: out };
    }
    if mdp.transitions.len() != ns * na {
        out.push(Violation::Shape(format!(
            "transition table has {} rows, expected {}",
            mdp.transitions.len(),
            ns * na
        )));
        return ValidationReport { violations: out };
    }
    if mdp.rewards.n_states() != ns || mdp.rewards.n_actions() != na {
        out.push(Violation::Shape(format!(
            "reward table is {}x{}, expected {ns}x{na}",
            mdp.rewards.n_states(),
            mdp.rewards.n_actions()
        )));
        return ValidationReport { violations: out };
    }
    if mdp.mu0.len() != ns {
        out.push(Violation::Shape(format!(
            "mu0 has length {}, expected {ns}",
            mdp.mu0.len()
        )));
        return ValidationReport { violations: out };
    }
    let gamma = mdp.gamma.as_f64();
    if !(gamma > 0.0 && gamma <= 1.0) {
        out.push(Violation::GammaOutOfRange(gamma));
    }

    let tol = sum_tolerance::<T>(PROB_SUM_TOL);
    for s in 0..ns {
        for a in 0..na {
            let mut sum = T::zero();
            for &(next, p) in mdp.successors(s, a) {
                if next >= ns {
                    out.push(Violation::SuccessorOutOfRange {
                        state: s,
                        action: a,
                        next,
                    });
                }
                if !(p >= T::zero()) {
                    out.push(Violation::NegativeProbability {
                        state: s,
                        action: a,
                        next,
                        prob: p.as_f64(),
                    });
                }
                sum = sum + p;
            }
            if !((sum - T::one()).abs() <= tol) {
                out.push(Violation::RowSum {
                    state: s,
                    action: a,
                    sum: sum.as_f64(),
                });
            }
            if !mdp.rewards[(s, a)].is_finite() {
                out.push(Violation::NonFiniteReward { state: s, action: a });
            }
        }
    }

    let mut mass = T::zero();
    for (s, &m) in mdp.mu0.iter().enumerate() {
        if !(m >= T::zero()) {
            out.push(Violation::Mu0Negative {
                state: s,
                mass: m.as_f64(),
            });
        }
        mass = mass + m;
    }
    if !((mass - T::one()).abs() <= tol) {
        out.push(Violation::Mu0Sum(mass.as_f64()));
    }

    for s in 0..mdp.terminal.len() {
        if !mdp.terminal[s] {
            continue;
        }
        if s >= ns {
            out.push(Violation::TerminalOutOfRange(s));
            continue;
        }
        for a in 0..na {
            let self_mass = mdp
                .successors(s, a)
                .iter()
                .filter(|(n, _)| *n == s)
                .fold(T::zero(), |acc, &(_, p)| acc + p);
            if !((self_mass - T::one()).abs() <= tol) {
                out.push(Violation::TerminalNotAbsorbing { state: s, action: a });
            }
            let r = mdp.rewards[(s, a)];
            if r != T::zero() {
                out.push(Violation::TerminalReward {
                    state: s,
                    action: a,
                    reward: r.as_f64(),
                });
            }
        }
    }

    if gamma == 1.0 {
        for s in unreachable_from_terminals(mdp) {
            out.push(Violation::CannotReachTerminal(s));
        }
    }

    ValidationReport { violations: out }
}

/// States with no positive-probability path to a terminal under any action
/// sequence. Under the uniform policy these are exactly the states that are
/// not absorbed with probability one.
fn unreachable_from_terminals<T: Scalar>(mdp: &Mdp<T>) -> Vec<usize> {
    let ns = mdp.n_states;
    let mut predecessors = vec![Vec::new(); ns];
    for s in 0..ns {
        for a in 0..mdp.n_actions {
            for &(next, p) in mdp.successors(s, a) {
                if next < ns && p > T::zero() {
                    predecessors[next].push(s);
                }
            }
        }
    }
    let mut reached = vec![false; ns];
    let mut queue: VecDeque<usize> = (0..ns).filter(|&s| mdp.is_terminal(s)).collect();
    for &s in &queue {
        reached[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        for &p in &predecessors[s] {
            if !reached[p] {
                reached[p] = true;
                queue.push_back(p);
            }
        }
    }
    (0..ns).filter(|&s| !reached[s]).collect()
}
