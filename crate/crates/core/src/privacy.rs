//! Gaussian mechanism for (λ, ε)-Rényi DP and the submissions built on it.

use alloc::format;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{Dataset, SufficientStatistic};
use crate::rng::{stream, SimRng, TAG_PERTURB};
use crate::suffstat::compute_ss;
use crate::{Error, Result};

/// Per-coordinate noise `N(0, variance)` with `variance = ½(λ/ε)Δ²`.
/// `ε = ∞` (no privacy) is represented by `f64::INFINITY` and variance 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    lambda: f64,
    epsilon: f64,
    variance: f64,
    sensitivity: f64,
}

impl NoiseSpec {
    pub fn gaussian(lambda: f64, epsilon: f64, sensitivity: f64) -> Result<Self> {
        Ok(NoiseSpec {
            lambda,
            epsilon,
            variance: noise_variance(lambda, epsilon, sensitivity)?,
            sensitivity,
        })
    }

    /// Explicit fields, used when an accounting step has already adjusted
    /// the variance (tempering or further perturbation).
    pub fn from_parts(lambda: f64, epsilon: f64, variance: f64, sensitivity: f64) -> Result<Self> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(Error::Argument(format!(
                "noise variance {variance} must be finite and non-negative"
            )));
        }
        if !(epsilon > 0.0) || !(sensitivity >= 0.0) {
            return Err(Error::arg(
                "epsilon must be positive and sensitivity non-negative",
            ));
        }
        Ok(NoiseSpec {
            lambda,
            epsilon,
            variance,
            sensitivity,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }
}

/// `½(λ/ε)Δ²`; zero for `ε = ∞`.
pub fn noise_variance(lambda: f64, epsilon: f64, sensitivity: f64) -> Result<f64> {
    if !(lambda > 1.0) {
        return Err(Error::Argument(format!(
            "Renyi order {lambda} must exceed 1"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!(
            "epsilon {epsilon} must be positive"
        )));
    }
    if !(sensitivity >= 0.0) || !sensitivity.is_finite() {
        return Err(Error::arg("sensitivity must be finite and non-negative"));
    }
    if epsilon.is_infinite() {
        return Ok(0.0);
    }
    Ok(0.5 * (lambda / epsilon) * sensitivity * sensitivity)
}

/// Add independent `N(0, noise.variance)` to every stored coordinate.
/// The count is public and left exact.
pub fn perturb(ss: &SufficientStatistic, noise: &NoiseSpec, seed: u64) -> SufficientStatistic {
    perturb_with(ss, noise.variance, &mut stream(seed, &[TAG_PERTURB]))
}

pub(crate) fn perturb_with(
    ss: &SufficientStatistic,
    variance: f64,
    rng: &mut SimRng,
) -> SufficientStatistic {
    if variance == 0.0 {
        return ss.clone();
    }
    let sd = libm::sqrt(variance);
    ss.map_entries(|v| {
        let z: f64 = rng.sample(StandardNormal);
        v + sd * z
    })
}

/// Guarantee after scaling noise variance by `1 + τε`: `ε/(1+τε)`, or `1/τ`
/// for a non-private party.
pub fn strengthened_epsilon(epsilon: f64, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Argument(format!(
            "tau {tau} must be finite and non-negative"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!(
            "epsilon {epsilon} must be positive"
        )));
    }
    if epsilon.is_infinite() {
        return Ok(if tau > 0.0 { 1.0 / tau } else { f64::INFINITY });
    }
    Ok(epsilon / (1.0 + tau * epsilon))
}

/// Everything the mediator receives from one party.
#[derive(Debug, Clone, PartialEq)]
pub struct PartySubmission {
    perturbed_ss: SufficientStatistic,
    noise: NoiseSpec,
}

impl PartySubmission {
    pub fn new(perturbed_ss: SufficientStatistic, noise: NoiseSpec) -> Self {
        PartySubmission {
            perturbed_ss,
            noise,
        }
    }

    /// Compute the exact statistic of `data`, perturb it with `noise`
    /// drawn from `seed`, and package it.
    pub fn from_dataset(data: &Dataset, noise: NoiseSpec, seed: u64) -> Self {
        let ss = compute_ss(data);
        PartySubmission::new(perturb(&ss, &noise, seed), noise)
    }

    pub fn count(&self) -> f64 {
        self.perturbed_ss.count()
    }

    pub fn perturbed_ss(&self) -> &SufficientStatistic {
        &self.perturbed_ss
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn dim(&self) -> usize {
        self.perturbed_ss.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn variance_examples() {
        assert_eq!(noise_variance(2.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(noise_variance(2.0, f64::INFINITY, 3.0).unwrap(), 0.0);
        assert!((noise_variance(2.0, 0.1, 2.0).unwrap() - 40.0).abs() < 1e-12);
        assert!(noise_variance(1.0, 1.0, 1.0).is_err());
        assert!(noise_variance(0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn strengthened_examples() {
        assert_eq!(strengthened_epsilon(f64::INFINITY, 0.5).unwrap(), 2.0);
        assert_eq!(strengthened_epsilon(0.7, 0.0).unwrap(), 0.7);
        assert_eq!(strengthened_epsilon(2.0, 0.5).unwrap(), 1.0);
        assert_eq!(
            strengthened_epsilon(f64::INFINITY, 0.0).unwrap(),
            f64::INFINITY
        );
        assert!(strengthened_epsilon(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn strengthening_strictly_improves(eps in 1e-3f64..1e3, tau in 1e-6f64..1e3) {
            prop_assert!(strengthened_epsilon(eps, tau).unwrap() < eps);
        }
    }

    fn base() -> SufficientStatistic {
        SufficientStatistic::new(9.0, vec![3.0, 6.0], vec![1.0, 2.0, 4.0], 1.0).unwrap()
    }

    #[test]
    fn zero_variance_is_identity_and_seed_is_deterministic() {
        let ss = base();
        let none = NoiseSpec::gaussian(2.0, f64::INFINITY, 1.0).unwrap();
        assert_eq!(perturb(&ss, &none, 4), ss);
        let some = NoiseSpec::gaussian(2.0, 1.0, 1.0).unwrap();
        assert_eq!(perturb(&ss, &some, 4), perturb(&ss, &some, 4));
        assert_ne!(perturb(&ss, &some, 4), perturb(&ss, &some, 5));
        assert_eq!(perturb(&ss, &some, 4).count(), 1.0);
    }

    /// Monte Carlo moment oracle: per-coordinate sample mean and variance.
    fn coordinate_moments(
        draws: impl Iterator<Item = SufficientStatistic>,
        center: &SufficientStatistic,
    ) -> (usize, vec::Vec<(f64, f64)>) {
        let m = SufficientStatistic::stat_len(center.dim());
        let c = center.to_vector();
        let mut acc = vec![(0.0, 0.0); m];
        let mut n = 0;
        for s in draws {
            let v = s.to_vector() - &c;
            for (a, x) in acc.iter_mut().zip(v.iter()) {
                a.0 += x;
                a.1 += x * x;
            }
            n += 1;
        }
        let out = acc.iter().map(|(s1, s2)| {
            let mean = s1 / n as f64;
            (mean, s2 / n as f64 - mean * mean)
        });
        (n, out.collect())
    }

    #[test]
    fn empirical_noise_variance() {
        let ss = base();
        let noise = NoiseSpec::gaussian(2.0, 0.5, 1.5).unwrap();
        let mut rng = stream(77, &[]);
        let (n, moments) = coordinate_moments(
            (0..100_000).map(|_| perturb_with(&ss, noise.variance(), &mut rng)),
            &ss,
        );
        assert_eq!(n, 100_000);
        for (mean, var) in moments {
            assert!((var / noise.variance() - 1.0).abs() < 0.03, "var {var}");
            assert!(mean.abs() < 4.0 * (noise.variance() / n as f64).sqrt());
        }
    }

    #[test]
    fn sequential_perturbations_add_variances() {
        let ss = base();
        let (v1, v2) = (0.7, 2.3);
        let mut rng = stream(78, &[]);
        let draws = (0..100_000).map(|_| {
            let once = perturb_with(&ss, v1, &mut rng);
            perturb_with(&once, v2, &mut rng)
        });
        let (_, moments) = coordinate_moments(draws, &ss);
        for (_, var) in moments {
            assert!((var / (v1 + v2) - 1.0).abs() < 0.03, "var {var}");
        }
    }
}
