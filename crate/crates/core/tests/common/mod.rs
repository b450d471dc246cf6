#![allow(dead_code)]

use rand::Rng;
use reward_advancement::{FeatureModel, Mdp, RewardBounds, Table};

/// Minimum of `Σ x_i` subject to `Σ e_i x_i = target`, `x_i ∈ [lo_i, hi_i]`,
/// by enumerating the vertices of the feasible segment: every vertex has at
/// most one coordinate strictly inside its box.
pub fn vertex_min_cost(e: &[f64], lo: &[f64], hi: &[f64], target: f64) -> Option<(f64, Vec<f64>)> {
    let n = e.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for free in 0..n {
        for mask in 0..(1u32 << (n - 1)) {
            let mut x = vec![0.0; n];
            for (bit, i) in (0..n).filter(|&i| i != free).enumerate() {
                x[i] = if mask >> bit & 1 == 1 { hi[i] } else { lo[i] };
            }
            let rest: f64 = (0..n).filter(|&i| i != free).map(|i| e[i] * x[i]).sum();
            x[free] = (target - rest) / e[free];
            let slack = 1e-9 * (1.0 + x[free].abs());
            if x[free] < lo[free] - slack || x[free] > hi[free] + slack {
                continue;
            }
            x[free] = x[free].clamp(lo[free], hi[free]);
            let cost: f64 = x.iter().sum();
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, x));
            }
        }
    }
    best
}

/// Brute-force minimum implementation cost of `delta_r` under `fm`.
pub fn brute_force_cost(fm: &FeatureModel<f64>, delta_r: f64) -> Option<f64> {
    let e: Vec<f64> = (0..fm.n_features()).map(|i| fm.efficiency(i)).collect();
    vertex_min_cost(&e, fm.c_min(), fm.c_max(), delta_r).map(|b| b.0)
}

pub fn random_features(rng: &mut impl Rng, max_features: usize) -> FeatureModel<f64> {
    let n = rng.gen_range(1..=max_features);
    let omega: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
    let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
    let c_min: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..0.0)).collect();
    let c_max: Vec<f64> = c_min.iter().map(|&c| c + rng.gen_range(0.0..5.0)).collect();
    FeatureModel::new(omega, phi, c_min, c_max).expect("valid random features")
}

/// Range of `k` over nonterminal pairs.
pub fn k_range(mdp: &Mdp<f64>, k: &Table<f64>) -> (f64, f64) {
    mdp.nonterminal_states()
        .flat_map(|s| k.row(s).iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// A single-feature model whose achievable range is exactly `[lo, hi]`.
pub fn interval_features(lo: f64, hi: f64) -> (FeatureModel<f64>, RewardBounds<f64>) {
    let fm = FeatureModel::new(vec![1.0], vec![1.0], vec![lo], vec![hi]).expect("nonempty interval");
    let bounds = RewardBounds::from_features(&fm);
    (fm, bounds)
}

/// Random reward bounds placed around the spread of `k`, feasible about
/// half the time.
pub fn random_interval(rng: &mut impl Rng, mdp: &Mdp<f64>, k: &Table<f64>) -> (f64, f64) {
    let (kmin, kmax) = k_range(mdp, k);
    let lo = kmin - rng.gen_range(0.0..3.0);
    let hi = lo + rng.gen_range(0.0..1.0) * (kmax - kmin + 3.0);
    (lo, hi)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
