mod support;

use dpcollab_core::divergence::knn_kl;
use dpcollab_core::inference::{
    exact_posterior, gaussian_product, gibbs_noise_aware, scaled_inputs, ss_moments, GibbsConfig,
};
use dpcollab_core::model::{generate_synthetic, SynConfig};
use dpcollab_core::privacy::{NoiseSpec, PartySubmission};
use dpcollab_core::suffstat::compute_ss;
use dpcollab_core::{NigBelief, SufficientStatistic, ThetaSample};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use support::oracles;

fn random_spd<R: Rng>(rng: &mut R, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    // random rotation of a diagonal with eigenvalues in [lo, hi]
    let a = DMatrix::from_fn(d, d, |_, _| oracles::normal_pair(rng).0);
    let q = a.qr().q();
    let diag = DMatrix::from_diagonal(&DVector::from_fn(d, |_, _| rng.random_range(lo..hi)));
    let s = &q * diag * q.transpose();
    (&s + s.transpose()) * 0.5
}

#[test]
fn ss_moments_match_monte_carlo() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x55_0001);
    let mut worst: f64 = 0.0;
    for case in 0..10 {
        let d = 1 + case % 2;
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s2 = rng.random_range(0.05..0.5);
        let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        let sigma = random_spd(&mut rng, d, 0.05, 0.4);
        let theta = ThetaSample::new(w.clone(), s2).unwrap();
        let exact = ss_moments(&theta, &DVector::from_vec(mu.clone()), &sigma);
        let l = sigma.clone().cholesky().unwrap().l();
        let (mc_mean, mc_cov) = oracles::mc_stat_moments(&mut rng, &w, s2, &mu, &l, 1_000_000);
        let check = |got: f64, want: f64| {
            let tol = (0.02 * want.abs()).max(1e-3);
            (got - want).abs() / tol
        };
        for i in 0..exact.mu_g.len() {
            worst = worst.max(check(exact.mu_g[i], mc_mean[i]));
            for j in 0..exact.mu_g.len() {
                worst = worst.max(check(exact.sigma_g[(i, j)], mc_cov[(i, j)]));
            }
        }
    }
    assert!(worst <= 1.0, "worst error is {worst} tolerances");
}

#[test]
fn gaussian_product_matches_importance_sampling() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x55_0002);
    for _ in 0..3 {
        let mu = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let p = random_spd(&mut rng, 3, 0.2, 1.5);
        let o = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let v = rng.random_range(0.3..1.0);
        let (mean, _) = gaussian_product(&mu, &p, &o, v).unwrap();
        let (est, se) = oracles::is_product_mean(&mut rng, &mu, &p, &o, v, 200_000);
        for i in 0..3 {
            assert!(
                (mean[i] - est[i]).abs() <= 3.0 * se[i],
                "coordinate {i}: {} vs {} ± {}",
                mean[i],
                est[i],
                se[i]
            );
        }
    }
}

fn desk() -> (SynConfig, NigBelief) {
    let cfg = SynConfig::desk();
    let prior = cfg.prior();
    (cfg, prior)
}

fn submissions(
    cfg: &SynConfig,
    eps: f64,
    seed: u64,
) -> (Vec<PartySubmission>, SufficientStatistic) {
    let data = generate_synthetic(cfg, seed).unwrap();
    let sens = dpcollab_core::suffstat::sensitivity_bound(
        cfg.dim(),
        cfg.input_bound(),
        cfg.output_bound(),
    )
    .unwrap();
    let mut total = SufficientStatistic::zeros(cfg.dim());
    let subs = data
        .partitions
        .iter()
        .enumerate()
        .map(|(k, p)| {
            total = &total + &compute_ss(p);
            let noise = NoiseSpec::gaussian(2.0, eps, sens).unwrap();
            PartySubmission::from_dataset(p, noise, seed ^ (k as u64 + 1))
        })
        .collect();
    (subs, total)
}

fn within_mc(samples: &[f64], want: f64, label: &str) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!(
        (mean - want).abs() <= 3.0 * se,
        "{label}: {mean} vs {want} ± {se}"
    );
}

fn check_prior_moments(prior: &NigBelief, set: &dpcollab_core::ThetaSampleSet) {
    let s2: Vec<f64> = set.iter().map(|t| t.sigma2()).collect();
    within_mc(&s2, prior.b() / (prior.a() - 1.0), "sigma2 mean");
    for i in 0..prior.dim() {
        let w: Vec<f64> = set.iter().map(|t| t.w()[i]).collect();
        within_mc(&w, prior.w_mean()[i], "w mean");
        let sq: Vec<f64> = w.iter().map(|x| (x - prior.w_mean()[i]).powi(2)).collect();
        // Var(w_i) = b/(a−1)·V_ii
        within_mc(
            &sq,
            prior.b() / (prior.a() - 1.0) * prior.v()[(i, i)],
            "w variance",
        );
    }
}

#[test]
fn empty_submissions_recover_the_prior() {
    let (cfg, prior) = desk();
    let set = gibbs_noise_aware(&prior, cfg.data_prior(), &[], &GibbsConfig::desk(3)).unwrap();
    check_prior_moments(&prior, &set);
}

#[test]
fn zero_weight_recovers_the_prior() {
    let (cfg, prior) = desk();
    let (subs, _) = submissions(&cfg, 0.5, 21);
    let zeroed = scaled_inputs(&subs, 0.0).unwrap();
    let set = gibbs_noise_aware(&prior, cfg.data_prior(), &zeroed, &GibbsConfig::desk(4)).unwrap();
    check_prior_moments(&prior, &set);
}

#[test]
fn negligible_noise_recovers_the_exact_posterior() {
    let (cfg, prior) = desk();
    let data = generate_synthetic(&cfg, 8).unwrap();
    let sens = dpcollab_core::suffstat::sensitivity_bound(
        cfg.dim(),
        cfg.input_bound(),
        cfg.output_bound(),
    )
    .unwrap();
    let mut total = SufficientStatistic::zeros(cfg.dim());
    let tiny: Vec<PartySubmission> = data
        .partitions
        .iter()
        .map(|p| {
            let ss = compute_ss(p);
            total = &total + &ss;
            PartySubmission::new(ss, NoiseSpec::from_parts(2.0, 1.0, 1e-12, sens).unwrap())
        })
        .collect();
    let gibbs = gibbs_noise_aware(&prior, cfg.data_prior(), &tiny, &GibbsConfig::desk(5)).unwrap();
    let exact = exact_posterior(&prior, &total)
        .unwrap()
        .sample_set(gibbs.len(), 77)
        .unwrap();
    let kl = knn_kl(&gibbs, &exact, 4).unwrap();
    assert!(kl < 0.15, "kl {kl}");
}

#[test]
fn tempering_matches_row_wise_reference() {
    let (cfg, prior) = desk();
    let data = generate_synthetic(&cfg, 31).unwrap();
    let all = data
        .partitions
        .iter()
        .skip(1)
        .fold(data.partitions[0].clone(), |acc, p| acc.concat(p).unwrap());
    let rows: Vec<(Vec<f64>, f64)> = all.rows().map(|(x, y)| (x.to_vec(), y)).collect();
    let ss = compute_ss(&all);
    for kappa in [0.0, 0.1, 0.37, 1.0] {
        let post = exact_posterior(
            &prior,
            &dpcollab_core::suffstat::scale_ss(&ss, kappa).unwrap(),
        )
        .unwrap();
        let (m, cov, a, b) = oracles::tempered_posterior_from_rows(
            prior.w_mean(),
            prior.v(),
            prior.a(),
            prior.b(),
            &rows,
            kappa,
        );
        assert!((post.w_mean() - &m).amax() < 1e-9);
        assert!((post.v() - &cov).amax() < 1e-9);
        assert!((post.a() - a).abs() < 1e-9);
        assert!((post.b() - b).abs() < 1e-9 * b.max(1.0));
    }
}
