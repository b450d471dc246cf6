//! Policy evaluation, the maximum-causal-entropy fixed point, visitation
//! frequencies and causal entropy.
//!
//! The MCE policy is the softmax of its own policy-evaluation Q-function:
//!
//! ```text
//! pi(a|s)  = exp Q(s,a) / Σ_a' exp Q(s,a')
//! Q(s,a)   = R(s,a) + γ Σ_s' T(s'|s,a) Σ_a' pi(a'|s') Q(s',a')
//! ```
//!
//! This is the Boltzmann-weighted mean backup, not the log-sum-exp
//! ("soft Bellman") backup; the two operators have different fixed points.
//! [`mce_policy`] solves the coupled system by damped Picard iteration.

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::StochasticPolicy;
use crate::scalar::{max_abs, Scalar};
use crate::table::{QTable, Table, VisitationTable};

/// Shared numerical settings for the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm stopping tolerance.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Weight of the new iterate in damped Picard steps.
    pub damping: f64,
    /// Largest |Q| accepted before the MCE solve is abandoned.
    pub q_limit: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iters: 100_000,
            damping: 0.5,
            q_limit: 700.0,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }
}

/// Smallest tolerance worth asking for at magnitude `scale`.
fn noise_floor<T: Scalar>(scale: T) -> T {
    T::epsilon() * T::of(64.0) * (T::one() + scale)
}

/// `V(s) = Σ_a pi(a|s) Q(s,a)`, zero on terminals.
fn state_values<T: Scalar>(mdp: &Mdp<T>, policy: &StochasticPolicy<T>, q: &QTable<T>, out: &mut [T]) {
    for (s, v) in out.iter_mut().enumerate() {
        *v = if mdp.is_terminal(s) {
            T::zero()
        } else {
            policy.mean(s, |a| q[(s, a)])
        };
    }
}

/// One evaluation backup of `q` under `policy`, written to `out`.
/// Returns the sup-norm of `out - q`.
fn backup<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    q: &QTable<T>,
    values: &mut [T],
    out: &mut QTable<T>,
) -> T {
    state_values(mdp, policy, q, values);
    let gamma = mdp.gamma();
    let mut residual = T::zero();
    for s in 0..mdp.n_states() {
        let terminal = mdp.is_terminal(s);
        for a in 0..mdp.n_actions() {
            let next = if terminal {
                T::zero()
            } else {
                mdp.reward(s, a) + gamma * mdp.expect(s, a, |n| values[n])
            };
            residual = residual.max((next - q[(s, a)]).abs());
            out[(s, a)] = next;
        }
    }
    residual
}

/// Sup-norm residual of the evaluation equation for `q` under `policy`.
pub fn evaluation_residual<T: Scalar>(mdp: &Mdp<T>, policy: &StochasticPolicy<T>, q: &QTable<T>) -> T {
    let mut values = vec![T::zero(); mdp.n_states()];
    let mut out = q.clone();
    backup(mdp, policy, q, &mut values, &mut out)
}

/// Iterative policy evaluation of `Q^pi`, starting from zero.
pub fn policy_evaluation_q<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    tolerance: f64,
    max_iters: usize,
) -> Result<QTable<T>> {
    let init = Table::zeros(mdp.n_states(), mdp.n_actions());
    policy_evaluation_q_from(mdp, policy, init, tolerance, max_iters)
}

/// Iterative policy evaluation warm-started at `init`. The returned table
/// has evaluation residual at most `tolerance` and zero terminal rows.
pub fn policy_evaluation_q_from<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    init: QTable<T>,
    tolerance: f64,
    max_iters: usize,
) -> Result<QTable<T>> {
    policy.check_shape(mdp)?;
    let tol = T::of(tolerance);
    let mut q = init;
    for s in mdp.terminals() {
        q.row_mut(s).iter_mut().for_each(|x| *x = T::zero());
    }
    let mut next = q.clone();
    let mut values = vec![T::zero(); mdp.n_states()];
    let mut residual = T::infinity();
    for _ in 0..=max_iters {
        residual = backup(mdp, policy, &q, &mut values, &mut next);
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(q);
        }
        std::mem::swap(&mut q, &mut next);
    }
    Err(Error::Nonconvergent {
        what: "policy evaluation",
        residual: residual.as_f64(),
        iterations: max_iters,
    })
}

/// The MCE policy together with its Q-function.
#[derive(Debug, Clone)]
pub struct MceSolution<T> {
    pub policy: StochasticPolicy<T>,
    pub q: QTable<T>,
    /// Combined residual: the larger of the fixed-point residual and the
    /// distance between `q` and the evaluation of `policy`.
    pub residual: T,
    pub iterations: usize,
}

/// Solves the coupled softmax / policy-evaluation fixed point.
///
/// Damped Picard steps `Q <- (1 - d) Q + d B(Q)` run until the backup
/// residual drops below an internal threshold; the candidate is then
/// checked against a warm-started policy evaluation and the threshold is
/// tightened until the combined residual is within `options.tolerance`.
pub fn mce_policy<T: Scalar>(mdp: &Mdp<T>, options: &SolverOptions) -> Result<MceSolution<T>> {
    let tol = T::of(options.tolerance);
    let damping = T::of(options.damping);
    let limit = T::of(options.q_limit);
    let (ns, na) = (mdp.n_states(), mdp.n_actions());

    let mut q = Table::zeros(ns, na);
    let mut next = q.clone();
    let mut values = vec![T::zero(); ns];
    let mut threshold = tol;
    let mut iterations = 0;
    loop {
        let residual = loop {
            let policy = StochasticPolicy::softmax(&q);
            let residual = backup(mdp, &policy, &q, &mut values, &mut next);
            if residual <= threshold {
                break residual;
            }
            if iterations >= options.max_iters || !residual.is_finite() {
                return Err(Error::Nonconvergent {
                    what: "MCE fixed point",
                    residual: residual.as_f64(),
                    iterations,
                });
            }
            for (x, &y) in q.as_mut_slice().iter_mut().zip(next.as_slice()) {
                *x = (T::one() - damping) * *x + damping * y;
            }
            iterations += 1;
            let magnitude = max_abs(q.as_slice());
            if magnitude > limit {
                return Err(Error::QMagnitude {
                    value: magnitude.as_f64(),
                    limit: options.q_limit,
                });
            }
        };

        let policy = StochasticPolicy::softmax(&q);
        let scale = max_abs(q.as_slice());
        let eval_tol = (tol * T::of(0.01)).max(noise_floor(scale));
        let evaluated = policy_evaluation_q_from(mdp, &policy, q.clone(), eval_tol.as_f64(), options.max_iters)?;
        let combined = residual.max(evaluated.sup_diff(&q));
        if combined <= tol {
            return Ok(MceSolution {
                policy,
                q,
                residual: combined,
                iterations,
            });
        }
        if threshold <= noise_floor(scale) {
            return Err(Error::Nonconvergent {
                what: "MCE fixed point",
                residual: combined.as_f64(),
                iterations,
            });
        }
        threshold = (threshold * T::of(0.1)).max(noise_floor(scale));
    }
}

/// Expected discounted visit counts `D(s,a) = Σ_t γ^t P(S_t = s) pi(a|s)`.
///
/// Mass flows forward from `mu0` and is dropped on entering a terminal
/// state. Iteration stops once the total mass still in flight is at most
/// `tolerance`, which bounds the flow-conservation error by the same amount.
pub fn visitation_frequencies<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    tolerance: f64,
    max_iters: usize,
) -> Result<VisitationTable<T>> {
    policy.check_shape(mdp)?;
    let tol = T::of(tolerance);
    let gamma = mdp.gamma();
    let ns = mdp.n_states();
    let mut d = Table::zeros(ns, mdp.n_actions());
    let mut mass: Vec<T> = (0..ns)
        .map(|s| if mdp.is_terminal(s) { T::zero() } else { mdp.mu0()[s] })
        .collect();
    let mut next = vec![T::zero(); ns];
    for _ in 0..max_iters {
        let in_flight: T = mass.iter().copied().sum();
        if in_flight <= tol {
            return Ok(d);
        }
        next.iter_mut().for_each(|x| *x = T::zero());
        for s in 0..ns {
            if mass[s] == T::zero() {
                continue;
            }
            for a in 0..mdp.n_actions() {
                let flow = mass[s] * policy.prob(s, a);
                d[(s, a)] = d[(s, a)] + flow;
                for &(n, p) in mdp.successors(s, a) {
                    if !mdp.is_terminal(n) {
                        next[n] = next[n] + gamma * flow * p;
                    }
                }
            }
        }
        std::mem::swap(&mut mass, &mut next);
    }
    Err(Error::Nonconvergent {
        what: "visitation frequencies",
        residual: mass.iter().copied().sum::<T>().as_f64(),
        iterations: max_iters,
    })
}

/// `Σ_{s,a} D(s,a) - μ0(s) - γ Σ inflow(s)` per nonterminal state, as a
/// sup-norm. Zero for exact visitation tables.
pub fn flow_conservation_error<T: Scalar>(mdp: &Mdp<T>, d: &VisitationTable<T>) -> T {
    let ns = mdp.n_states();
    let mut inflow = vec![T::zero(); ns];
    for (s, a, flow) in d.iter() {
        for &(n, p) in mdp.successors(s, a) {
            inflow[n] = inflow[n] + mdp.gamma() * flow * p;
        }
    }
    mdp.nonterminal_states()
        .map(|s| {
            let out: T = d.row(s).iter().copied().sum();
            (out - mdp.mu0()[s] - inflow[s]).abs()
        })
        .fold(T::zero(), T::max)
}

/// Causal entropy `-Σ_{s,a} D(s,a) ln pi(a|s)`, with `0 ln 0 = 0`.
pub fn causal_entropy<T: Scalar>(d: &VisitationTable<T>, policy: &StochasticPolicy<T>) -> Result<T> {
    if !d.same_shape(policy.probs()) {
        return Err(Error::ShapeMismatch(
            "visitation table and policy differ in shape".into(),
        ));
    }
    let mut total = T::zero();
    for (s, a, visits) in d.iter() {
        if visits == T::zero() {
            continue;
        }
        let p = policy.prob(s, a);
        if p <= T::zero() {
            return Err(Error::EntropyDomain { state: s, action: a });
        }
        total = total - visits * p.ln();
    }
    Ok(total)
}

/// Tolerance on the agreement of the two expected-return computations.
pub const RETURN_CROSS_CHECK_TOL: f64 = 1e-8;

/// Expected return of `policy`, computed as `Σ D(s,a) R(s,a)` and
/// cross-checked against `Σ_s μ0(s) Σ_a pi(a|s) Q^pi(s,a)`.
pub fn expected_return<T: Scalar>(mdp: &Mdp<T>, policy: &StochasticPolicy<T>, options: &SolverOptions) -> Result<T> {
    let tol = options.tolerance.min(1e-12).max(noise_floor(T::one()).as_f64());
    let d = visitation_frequencies(mdp, policy, tol, options.max_iters)?;
    let by_visits: T = d.iter().map(|(s, a, v)| v * mdp.reward(s, a)).sum();
    let q = policy_evaluation_q(mdp, policy, tol, options.max_iters)?;
    let by_q: T = (0..mdp.n_states())
        .filter(|&s| !mdp.is_terminal(s))
        .map(|s| mdp.mu0()[s] * policy.mean(s, |a| q[(s, a)]))
        .sum();
    let scale = T::one().max(by_visits.abs());
    let allowed = T::of(RETURN_CROSS_CHECK_TOL).max(noise_floor(scale) * T::of(1e4));
    if (by_visits - by_q).abs() > allowed * scale {
        return Err(Error::CrossCheck {
            what: "visitation and Q-function returns",
            first: by_visits.as_f64(),
            second: by_q.as_f64(),
        });
    }
    Ok(by_visits)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// s0 --a0 (R=4)--> terminal, s0 --a1 (R=1)--> terminal.
    fn one_step(r0: f64, r1: f64) -> Mdp<f64> {
        Mdp::builder(2, 2)
            .transition(0, 0, 1, 1.0)
            .transition(0, 1, 1, 1.0)
            .reward(0, 0, r0)
            .reward(0, 1, r1)
            .terminal(1)
            .start(0)
            .gamma(1.0)
            .build()
            .unwrap()
    }

    /// 0 -> 1 -> 2 -> terminal 3, single action, rewards 1, 2, 3.
    fn chain(gamma: f64) -> Mdp<f64> {
        Mdp::builder(4, 1)
            .transition(0, 0, 1, 1.0)
            .transition(1, 0, 2, 1.0)
            .transition(2, 0, 3, 1.0)
            .reward(0, 0, 1.0)
            .reward(1, 0, 2.0)
            .reward(2, 0, 3.0)
            .terminal(3)
            .start(0)
            .gamma(gamma)
            .build()
            .unwrap()
    }

    #[test]
    fn one_step_q_equals_rewards() {
        let mdp = one_step(4.0, 1.0);
        for pi in [
            StochasticPolicy::uniform(2, 2),
            StochasticPolicy::deterministic(2, &[1, 0]),
        ] {
            let q = policy_evaluation_q(&mdp, &pi, 1e-12, 100).unwrap();
            assert_eq!(q.row(0), &[4.0, 1.0]);
            assert_eq!(q.row(1), &[0.0, 0.0]);
        }
    }

    #[test]
    fn zero_rewards_give_zero_q() {
        let mdp = one_step(0.0, 0.0);
        let q = policy_evaluation_q(&mdp, &StochasticPolicy::uniform(2, 2), 1e-12, 100).unwrap();
        assert!(q.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn chain_q_matches_unrolled_recursion() {
        let g = 0.9;
        let q = policy_evaluation_q(&chain(g), &StochasticPolicy::uniform(4, 1), 1e-13, 1000).unwrap();
        assert!((q[(2, 0)] - 3.0).abs() < 1e-12);
        assert!((q[(1, 0)] - (2.0 + g * 3.0)).abs() < 1e-12);
        assert!((q[(0, 0)] - (1.0 + g * 2.0 + g * g * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn evaluation_reports_nonconvergence() {
        let mdp = Mdp::<f64>::builder(1, 1)
            .transition(0, 0, 0, 1.0)
            .reward(0, 0, 1.0)
            .start(0)
            .gamma(0.999)
            .build()
            .unwrap();
        let err = policy_evaluation_q(&mdp, &StochasticPolicy::uniform(1, 1), 1e-12, 10).unwrap_err();
        assert!(matches!(err, Error::Nonconvergent { iterations: 10, .. }), "{err}");
    }

    #[test]
    fn mce_one_step_is_softmax_of_rewards() {
        let sol = mce_policy(&one_step(4.0, 1.0), &SolverOptions::default()).unwrap();
        let expected = 4f64.exp() / (4f64.exp() + 1f64.exp());
        assert!((sol.policy.prob(0, 0) - expected).abs() < 1e-10);
        assert!(sol.residual <= 1e-10);
    }

    #[test]
    fn mce_identical_rewards_give_uniform_policy() {
        let sol = mce_policy(&one_step(2.5, 2.5), &SolverOptions::default()).unwrap();
        assert!((sol.policy.prob(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mce_q_guard_trips_on_runaway_values() {
        // Self-loop with positive reward and γ close to one: |Q| approaches 1000.
        let mdp = Mdp::<f64>::builder(1, 2)
            .transition(0, 0, 0, 1.0)
            .transition(0, 1, 0, 1.0)
            .reward(0, 0, 1.0)
            .reward(0, 1, 1.0)
            .start(0)
            .gamma(0.999)
            .build()
            .unwrap();
        let err = mce_policy(&mdp, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::QMagnitude { .. }), "{err}");
    }

    #[test]
    fn one_step_visitation_splits_by_policy() {
        let d = visitation_frequencies(&one_step(4.0, 1.0), &StochasticPolicy::uniform(2, 2), 1e-12, 100).unwrap();
        assert_eq!(d.row(0), &[0.5, 0.5]);
        assert_eq!(d.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn deterministic_chain_has_unit_flow() {
        let mdp = Mdp::builder(3, 2)
            .transition(0, 0, 1, 1.0)
            .transition(0, 1, 2, 1.0)
            .transition(1, 0, 2, 1.0)
            .transition(1, 1, 0, 1.0)
            .terminal(2)
            .start(0)
            .build()
            .unwrap();
        let pi = StochasticPolicy::deterministic(2, &[0, 0, 0]);
        let d = visitation_frequencies(&mdp, &pi, 1e-12, 100).unwrap();
        assert_eq!(d.as_slice(), &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn entropy_of_uniform_binary_choice() {
        let d = Table::from_vec(1, 2, vec![0.5, 0.5]).unwrap();
        let h = causal_entropy(&d, &StochasticPolicy::uniform(1, 2)).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn entropy_of_deterministic_policy_is_zero() {
        let pi = StochasticPolicy::deterministic(2, &[1]);
        let d = Table::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(causal_entropy(&d, &pi).unwrap(), 0.0);
    }

    #[test]
    fn entropy_domain_error() {
        let pi = StochasticPolicy::deterministic(2, &[1]);
        let d = Table::from_vec(1, 2, vec![0.1, 0.9]).unwrap();
        assert!(matches!(
            causal_entropy(&d, &pi),
            Err(Error::EntropyDomain { state: 0, action: 0 })
        ));
    }

    #[test]
    fn two_step_uniform_entropy_is_two_ln_two() {
        // 0 -> {1 via a0, 2 via a1}; 1, 2 -> terminal 3 under both actions.
        // Every trajectory makes two uniform binary choices.
        let mdp = Mdp::builder(4, 2)
            .transition(0, 0, 1, 1.0)
            .transition(0, 1, 2, 1.0)
            .transition(1, 0, 3, 1.0)
            .transition(1, 1, 3, 1.0)
            .transition(2, 0, 3, 1.0)
            .transition(2, 1, 3, 1.0)
            .terminal(3)
            .start(0)
            .build()
            .unwrap();
        let pi = StochasticPolicy::uniform(4, 2);
        let d = visitation_frequencies(&mdp, &pi, 1e-14, 100).unwrap();
        let h = causal_entropy(&d, &pi).unwrap();
        // Enumerated: four equally likely trajectories, ln 4 bits of choice.
        assert!((h - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn expected_return_of_uniform_one_step() {
        let r = expected_return(
            &one_step(4.0, 1.0),
            &StochasticPolicy::uniform(2, 2),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((r - 2.5).abs() < 1e-15);
        let r = expected_return(
            &one_step(0.0, 0.0),
            &StochasticPolicy::uniform(2, 2),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn single_precision_mce() {
        let mdp = Mdp::<f32>::builder(2, 2)
            .transition(0, 0, 1, 1.0)
            .transition(0, 1, 1, 1.0)
            .reward(0, 0, 4.0)
            .reward(0, 1, 1.0)
            .terminal(1)
            .start(0)
            .build()
            .unwrap();
        let sol = mce_policy(&mdp, &SolverOptions::default().with_tolerance(1e-5)).unwrap();
        assert!((sol.policy.prob(0, 0) - 0.952_574_1).abs() < 1e-6);
    }
}
