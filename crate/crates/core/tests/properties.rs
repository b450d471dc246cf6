mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_advancement::generate::{random_beta, random_mdp, random_policy, RandomMdpConfig};
use reward_advancement::{
    advancement_delta_q, assign_features, compute_k, mce_policy, min_cost_of_reward, min_reward_solution_with_bounds,
    objective_value, verify_transformation, AdvancementOptions, Error, Mdp, MinCostOptions, SolverOptions, Table,
};

use common::{brute_force_cost, interval_features, random_features, random_interval};

fn instance(seed: u64) -> (ChaCha8Rng, Mdp<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mdp = random_mdp(&mut rng, &RandomMdpConfig::default());
    (rng, mdp)
}

/// `d(s) - γ E[d(s')]` with `d` zero on terminals.
fn shaping(mdp: &Mdp<f64>, d: &[f64]) -> Table<f64> {
    Table::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        if mdp.is_terminal(s) {
            0.0
        } else {
            d[s] - mdp.gamma() * mdp.expect(s, a, |n| if mdp.is_terminal(n) { 0.0 } else { d[n] })
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_beta_reproduces_the_target(seed in any::<u64>()) {
        let (mut rng, mdp) = instance(seed);
        let target = random_policy(&mut rng, mdp.n_states(), mdp.n_actions(), 0.05);
        let beta = random_beta(&mut rng, &mdp, 5.0);
        let opts = AdvancementOptions::default();
        let sol = advancement_delta_q(&mdp, &target, &beta, &opts).unwrap();
        let report = verify_transformation(&mdp, &sol, 1e-6, &opts.solver).unwrap();
        prop_assert!(report.pass, "deviation {}", report.max_deviation);
    }

    #[test]
    fn family_is_affine_in_beta(seed in any::<u64>()) {
        let (mut rng, mdp) = instance(seed);
        let target = random_policy(&mut rng, mdp.n_states(), mdp.n_actions(), 0.05);
        let b1 = random_beta(&mut rng, &mdp, 5.0);
        let b2 = random_beta(&mut rng, &mdp, 5.0);
        let opts = AdvancementOptions::default();
        let s1 = advancement_delta_q(&mdp, &target, &b1, &opts).unwrap();
        let s2 = advancement_delta_q(&mdp, &target, &b2, &opts).unwrap();
        let d: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| x - y).collect();
        for s in mdp.nonterminal_states() {
            for a in 0..mdp.n_actions() {
                let gap = s1.delta_q[(s, a)] - s2.delta_q[(s, a)] - d[s];
                prop_assert!(gap.abs() < 1e-9, "delta_q gap {gap} at ({s},{a})");
            }
        }
        let expected = shaping(&mdp, &d);
        let dr = s1.delta_r.zip_with(&s2.delta_r, |x, y| x - y);
        prop_assert!(dr.sup_diff(&expected) < 1e-9);
    }

    #[test]
    fn own_policy_needs_only_shaping(seed in any::<u64>()) {
        let (mut rng, mdp) = instance(seed);
        let own = mce_policy(&mdp, &SolverOptions::default()).unwrap().policy;
        let beta = random_beta(&mut rng, &mdp, 5.0);
        let sol = advancement_delta_q(&mdp, &own, &beta, &AdvancementOptions::default()).unwrap();
        let potential: Vec<f64> = (0..mdp.n_states())
            .map(|s| if mdp.is_terminal(s) { 0.0 } else { sol.delta_q[(s, 0)] })
            .collect();
        for s in mdp.nonterminal_states() {
            for a in 1..mdp.n_actions() {
                prop_assert!((sol.delta_q[(s, a)] - potential[s]).abs() < 1e-8);
            }
        }
        prop_assert!(sol.delta_r.sup_diff(&shaping(&mdp, &potential)) < 1e-8);
    }

    #[test]
    fn greedy_assignment_is_optimal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fm = random_features(&mut rng, 5);
        let target = rng.gen_range(fm.r_min()..=fm.r_max());
        let df = assign_features(target, &fm).unwrap();
        let oracle = brute_force_cost(&fm, target).unwrap();
        prop_assert!((fm.cost_of(&df) - oracle).abs() < 1e-6);
        prop_assert!((fm.reward_of(&df) - target).abs() < 1e-9);
    }

    #[test]
    fn unachievable_reward_is_rejected(seed in any::<u64>(), above in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fm = random_features(&mut rng, 4);
        let target = if above { fm.r_max() + 0.5 } else { fm.r_min() - 0.5 };
        let rejected = matches!(min_cost_of_reward(target, &fm), Err(Error::NotAchievable { .. }));
        prop_assert!(rejected);
    }

    #[test]
    fn cost_is_monotone_in_reward(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fm = random_features(&mut rng, 5);
        let mut rewards: Vec<f64> = (0..8).map(|_| rng.gen_range(fm.r_min()..=fm.r_max())).collect();
        rewards.sort_by(f64::total_cmp);
        let costs: Vec<f64> = rewards.iter().map(|&r| min_cost_of_reward(r, &fm).unwrap()).collect();
        prop_assert!(costs.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn closed_form_matches_family_at_beta_min(seed in any::<u64>()) {
        let (mut rng, mdp) = instance(seed);
        let target = random_policy(&mut rng, mdp.n_states(), mdp.n_actions(), 0.05);
        let k = compute_k(&mdp, &target, 1e-8).unwrap();
        let (lo, hi) = random_interval(&mut rng, &mdp, &k);
        let (fm, bounds) = interval_features(lo, hi + 20.0);
        if let Ok(sol) = min_reward_solution_with_bounds(&mdp, &target, &fm, &bounds, &MinCostOptions::default()) {
            prop_assert!(sol.delta_r_star.sup_diff(&sol.advancement.delta_r) < 1e-9);
            for s in mdp.nonterminal_states() {
                prop_assert!(sol.delta_r_star.row(s).iter().all(|&r| r >= lo - 1e-9 && r <= hi + 20.0 + 1e-9));
            }
        }
    }

    #[test]
    fn beta_min_beats_other_feasible_potentials(seed in any::<u64>()) {
        let (mut rng, mdp) = instance(seed);
        let target = random_policy(&mut rng, mdp.n_states(), mdp.n_actions(), 0.05);
        let k = compute_k(&mdp, &target, 1e-8).unwrap();
        let (lo, _) = random_interval(&mut rng, &mdp, &k);
        let (fm, bounds) = interval_features(lo, lo + 100.0);
        let opts = MinCostOptions::default();
        let Ok(sol) = min_reward_solution_with_bounds(&mdp, &target, &fm, &bounds, &opts) else {
            return Ok(());
        };
        prop_assert!(sol.beta_min.iter().zip(&sol.beta_max).all(|(a, b)| *a <= b + 1e-9));
        for t in [0.25, 0.5, 1.0] {
            let beta: Vec<f64> = sol.beta_min.iter().zip(&sol.beta_max).map(|(a, b)| a + t * (b - a)).collect();
            let other = advancement_delta_q(&mdp, &target, &beta, &opts.advancement).unwrap();
            prop_assert!(objective_value(&mdp, &target, &other) >= sol.objective - 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn single_precision_pipeline_verifies(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = RandomMdpConfig { gammas: vec![0.9], ..RandomMdpConfig::default() };
        let mdp: Mdp<f32> = random_mdp(&mut rng, &config);
        let target = random_policy::<f32>(&mut rng, mdp.n_states(), mdp.n_actions(), 0.05);
        let beta = random_beta(&mut rng, &mdp, 2.0);
        let opts = AdvancementOptions {
            solver: SolverOptions::default().with_tolerance(1e-5),
            ..AdvancementOptions::default()
        };
        let sol = advancement_delta_q(&mdp, &target, &beta, &opts).unwrap();
        let report = verify_transformation(&mdp, &sol, 1e-3, &opts.solver).unwrap();
        prop_assert!(report.pass, "deviation {}", report.max_deviation);
    }
}
