//! Posterior inference for Bayesian linear regression from (perturbed)
//! sufficient statistics.

mod gibbs;
mod inputs;
mod moments;
mod product;

pub use gibbs::{gibbs_noise_aware, GibbsConfig};
pub use inputs::{further_perturbed, scaled_inputs, FurtherNoise};
pub use moments::{ss_moments, MomentPair};
pub use product::gaussian_product;

use alloc::format;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::linalg::{std_normal_vec, Chol};
use crate::model::{NigBelief, SufficientStatistic, ThetaSample};
use crate::privacy::PartySubmission;
use crate::{Error, Result};

/// The NIG prior in natural form, cached for repeated conjugate updates.
#[derive(Debug, Clone)]
pub(crate) struct Conjugate {
    prec0: DMatrix<f64>,
    h0: DVector<f64>,
    quad0: f64,
    a0: f64,
    b0: f64,
}

/// Posterior in natural form: precision factor and mean.
pub(crate) struct Updated {
    chol: Chol,
    mean: DVector<f64>,
    a: f64,
    b: f64,
}

impl Conjugate {
    pub(crate) fn new(prior: &NigBelief) -> Self {
        let prec0 = nalgebra::Cholesky::new(prior.v().clone())
            .expect("NigBelief holds an SPD covariance")
            .inverse();
        let h0 = &prec0 * prior.w_mean();
        let quad0 = prior.w_mean().dot(&h0);
        Conjugate {
            prec0,
            h0,
            quad0,
            a0: prior.a(),
            b0: prior.b(),
        }
    }

    /// `Λₙ = Λ₀ + XᵀX`, `wₙ = Λₙ⁻¹(Λ₀w₀ + Xᵀy)`, `aₙ = a₀ + c/2`,
    /// `bₙ = b₀ + ½(yᵀy + w₀ᵀΛ₀w₀ − wₙᵀΛₙwₙ)`.
    pub(crate) fn update(&self, ss: &SufficientStatistic) -> Result<Updated> {
        let d = self.h0.len();
        if ss.dim() != d {
            return Err(Error::Argument(format!(
                "statistic of dimension {} for a prior of dimension {d}",
                ss.dim()
            )));
        }
        let prec = &self.prec0 + ss.xx_matrix();
        let chol = nalgebra::Cholesky::new(prec).ok_or_else(|| {
            Error::DegeneratePosterior("posterior precision is not positive definite".into())
        })?;
        let h = &self.h0 + ss.xy_vector();
        let mean = chol.solve(&h);
        let a = self.a0 + 0.5 * ss.count();
        let b = self.b0 + 0.5 * (ss.yy() + self.quad0 - h.dot(&mean));
        if !(b > 0.0) || !b.is_finite() || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegeneratePosterior(format!(
                "posterior scale b = {b} is not positive"
            )));
        }
        Ok(Updated { chol, mean, a, b })
    }
}

impl Updated {
    pub(crate) fn belief(&self) -> Result<NigBelief> {
        NigBelief::new(self.mean.clone(), self.chol.inverse(), self.a, self.b)
            .map_err(|e| Error::DegeneratePosterior(format!("{e}")))
    }

    /// `σ² ~ IG(a, b)`, `w = wₙ + σ L⁻ᵀz` with `Λₙ = LLᵀ`.
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ThetaSample {
        let g: f64 = Gamma::new(self.a, 1.0).expect("a > 0").sample(rng);
        let sigma2 = (self.b / g).max(f64::MIN_POSITIVE);
        let z = std_normal_vec(rng, self.mean.len());
        let offset = self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        let w = &self.mean + offset * libm::sqrt(sigma2);
        ThetaSample::new(w.iter().copied().collect(), sigma2).expect("finite draw")
    }
}

/// Exact conjugate NIG posterior given exact (or trusted) statistics.
pub fn exact_posterior(prior: &NigBelief, ss: &SufficientStatistic) -> Result<NigBelief> {
    if ss.dim() == prior.dim() && ss.count() == 0.0 && ss.to_vector().iter().all(|v| *v == 0.0) {
        return Ok(prior.clone());
    }
    Conjugate::new(prior).update(ss)?.belief()
}

/// Treats the summed perturbed statistics as exact; the declared noise is
/// ignored.
pub fn noise_naive_posterior(
    prior: &NigBelief,
    submissions: &[PartySubmission],
) -> Result<NigBelief> {
    let mut total = SufficientStatistic::zeros(prior.dim());
    for s in submissions {
        total = total.checked_add(s.perturbed_ss())?;
    }
    exact_posterior(prior, &total)
}
