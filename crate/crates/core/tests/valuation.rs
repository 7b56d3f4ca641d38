mod support;

use dpcollab_core::divergence::{nig_kl, KlOptions};
use dpcollab_core::inference::{exact_posterior, gibbs_noise_aware, GibbsConfig};
use dpcollab_core::valuation::{
    alt_valuation, rho_shapley_targets, rho_upper_bound, shapley, value_all_coalitions,
    CoalitionValues,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use support::{fixtures, oracles};

fn random_map<R: Rng>(rng: &mut R, n: usize) -> CoalitionValues {
    let mut v: Vec<f64> = (0..1usize << n)
        .map(|_| rng.random_range(-1.0..5.0))
        .collect();
    v[0] = 0.0;
    CoalitionValues::new(n, v).unwrap()
}

#[test]
fn shapley_matches_permutation_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(0xF00D);
    for _ in 0..100 {
        let map = random_map(&mut rng, 3);
        let phi = shapley(&map);
        let want = oracles::shapley_by_permutations(3, |m| map.get(m));
        for (a, b) in phi.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12, "{phi:?} vs {want:?}");
        }
    }
}

proptest! {
    #[test]
    fn shapley_is_efficient(n in 1usize..=6, seed in any::<u64>()) {
        let map = random_map(&mut ChaCha20Rng::seed_from_u64(seed), n);
        let total: f64 = shapley(&map).iter().sum();
        prop_assert!((total - (map.grand() - map.get(0))).abs() <= 1e-9);
    }
}

/// `v_C = Σ_{i∈C} a_i + Σ_{i<j ∈ C} b_ij` on integer weights, so every sum is
/// exact in floating point.
fn pairwise_map(a: &[f64], b: &[[f64; 4]; 4]) -> CoalitionValues {
    let n = a.len();
    let v = (0..1u32 << n)
        .map(|m| {
            let mut s = 0.0;
            for i in 0..n {
                if m >> i & 1 == 1 {
                    s += a[i];
                    for (j, bij) in b[i].iter().enumerate().skip(i + 1) {
                        if m >> j & 1 == 1 {
                            s += bij;
                        }
                    }
                }
            }
            s
        })
        .collect();
    CoalitionValues::new(n, v).unwrap()
}

#[test]
fn null_player_gets_nothing() {
    let mut b = [[0.0; 4]; 4];
    b[0][1] = 2.0;
    b[1][2] = 1.0;
    let map = pairwise_map(&[3.0, 5.0, 4.0, 0.0], &b);
    let phi = shapley(&map);
    assert_eq!(phi[3], 0.0);
    let r = rho_shapley_targets(&map, &phi, 0.5).unwrap();
    assert_eq!(r[3], 0.0);
}

#[test]
fn symmetric_players_are_treated_equally() {
    let mut b = [[0.0; 4]; 4];
    b[0][2] = 2.0;
    b[1][2] = 2.0;
    b[0][1] = 1.0;
    b[2][3] = 3.0;
    let map = pairwise_map(&[4.0, 4.0, 1.0, 2.0], &b);
    let phi = shapley(&map);
    assert_eq!(phi[0], phi[1]);
    let r = rho_shapley_targets(&map, &phi, 0.3).unwrap();
    assert_eq!(r[0], r[1]);
}

#[test]
fn dominance_orders_shapley_values_strictly() {
    // party 0 matches party 1 on every coalition except with party 3
    let mut b = [[0.0; 4]; 4];
    b[0][2] = 1.0;
    b[1][2] = 1.0;
    b[0][3] = 2.0;
    b[1][3] = 1.0;
    let map = pairwise_map(&[3.0, 3.0, 2.0, 1.0], &b);
    for c in 0..16u32 {
        if c & 0b11 == 0 {
            assert!(map.get(c | 1) >= map.get(c | 2));
        }
    }
    let phi = shapley(&map);
    assert!(phi[0] > phi[1], "{phi:?}");
    let r = rho_shapley_targets(&map, &phi, 0.7).unwrap();
    assert!(r[0] > r[1]);
}

#[test]
fn raising_marginals_raises_shapley_value() {
    let mut rng = ChaCha20Rng::seed_from_u64(0xF4);
    for _ in 0..50 {
        let base = random_map(&mut rng, 4);
        let i = rng.random_range(0..4usize);
        let strict = loop {
            let m = rng.random_range(0..16u32);
            if m >> i & 1 == 1 {
                break m;
            }
        };
        let mut v = base.as_slice().to_vec();
        for (m, x) in v.iter_mut().enumerate() {
            if m >> i & 1 == 1 {
                *x += if m as u32 == strict {
                    1.0
                } else {
                    rng.random_range(0.0..1.0)
                };
            }
        }
        let raised = CoalitionValues::new(4, v).unwrap();
        assert!(shapley(&raised)[i] > shapley(&base)[i]);
    }
}

/// Monotone submodular `v_C = (Σ_{i∈C} a_i)^γ`: positive values and
/// Shapley values.
fn concave_map<R: Rng>(rng: &mut R, n: usize) -> CoalitionValues {
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    let g = rng.random_range(0.3..1.0);
    let v = (0..1u32 << n)
        .map(|m| {
            (0..n)
                .filter(|i| m >> i & 1 == 1)
                .map(|i| a[i])
                .sum::<f64>()
                .powf(g)
        })
        .collect();
    CoalitionValues::new(n, v).unwrap()
}

#[test]
fn rho_below_the_bound_is_rational() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x2407);
    for _ in 0..100 {
        let n = rng.random_range(2..=5);
        let map = concave_map(&mut rng, n);
        let phi = shapley(&map);
        let bound = rho_upper_bound(&map, &phi);
        assert!(!bound.flagged && bound.bound > 0.0);
        let rho = 0.9 * bound.bound.min(1.0);
        let r = rho_shapley_targets(&map, &phi, rho).unwrap();
        for (i, &ri) in r.iter().enumerate() {
            assert!(ri >= map.solo(i), "party {i}: {ri} < {}", map.solo(i));
        }
    }
}

#[test]
fn zero_noise_single_party_matches_closed_form() {
    let (cfg, parts) = fixtures::desk_parts(41);
    let (subs, total) = fixtures::submit(&cfg, &parts[2..], &[f64::INFINITY], 1);
    let prior = cfg.prior();
    let val = value_all_coalitions(
        &prior,
        cfg.data_prior(),
        &subs,
        &GibbsConfig::desk(9),
        prior.sample_set(4000, 90).unwrap(),
        KlOptions::folds(5),
    )
    .unwrap();
    let v1 = &val.estimates[1].value;
    let want = nig_kl(&exact_posterior(&prior, &total).unwrap(), &prior).unwrap();
    assert!(
        (v1.mean - want).abs() <= 3.0 * v1.std_err,
        "{} ± {} vs {want}",
        v1.mean,
        v1.std_err
    );
    assert_eq!(val.estimates[0].value.mean, 0.0);
}

#[test]
fn alternative_valuation_limits() {
    let (cfg, parts) = fixtures::desk_parts(42);
    let (subs, _) = fixtures::submit(&cfg, &parts, &[0.5, 0.5, 0.5], 2);
    let val = value_all_coalitions(
        &cfg.prior(),
        cfg.data_prior(),
        &subs,
        &GibbsConfig::desk(10),
        cfg.prior().sample_set(4000, 91).unwrap(),
        KlOptions::folds(5),
    )
    .unwrap();
    let grand = val.grand_samples();
    let vn = val.estimates.last().unwrap().value.clone();
    let alt_empty = alt_valuation(
        grand,
        &val.prior_samples,
        &val.prior_samples,
        KlOptions::folds(5),
    )
    .unwrap();
    assert!(
        alt_empty.mean.abs() <= 3.0 * alt_empty.std_err,
        "{alt_empty:?}"
    );
    let alt_n = alt_valuation(grand, grand, &val.prior_samples, KlOptions::folds(5)).unwrap();
    let se = alt_n.std_err.hypot(vn.std_err);
    assert!(
        (alt_n.mean - vn.mean).abs() <= 3.0 * se,
        "{alt_n:?} vs {} ± {}",
        vn.mean,
        vn.std_err
    );
}

#[test]
fn value_grows_with_input_coverage() {
    let (cfg, parts) = fixtures::desk_parts(43);
    let mut firsts: Vec<f64> = parts
        .iter()
        .flat_map(|p| p.rows().map(|(x, _)| x[0]).collect::<Vec<_>>())
        .collect();
    firsts.sort_by(f64::total_cmp);
    let prior = cfg.prior();
    let prior_samples = prior.sample_set(4000, 99).unwrap();
    let mut means = Vec::new();
    for pct in [25usize, 50, 75, 100] {
        let cut = firsts[(firsts.len() * pct / 100).saturating_sub(1)];
        let kept: Vec<_> = parts.iter().map(|p| fixtures::keep_below(p, cut)).collect();
        let vals: Vec<f64> = (0..20u64)
            .map(|s| {
                let (subs, _) = fixtures::submit(&cfg, &kept, &[1.0; 3], 1000 + s);
                let post =
                    gibbs_noise_aware(&prior, cfg.data_prior(), &subs, &GibbsConfig::desk(500 + s))
                        .unwrap();
                dpcollab_core::divergence::surprise(&post, &prior_samples, 5)
                    .unwrap()
                    .mean
            })
            .collect();
        means.push(fixtures::mean_se(&vals).0);
    }
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}
