use alloc::format;
use alloc::vec::Vec;
use nalgebra::DVector;

use crate::linalg::std_normal_vec;
use crate::model::SufficientStatistic;
use crate::privacy::{strengthened_epsilon, NoiseSpec, PartySubmission};
use crate::rng::{stream, TAG_FURTHER};
use crate::suffstat::scale_ss;
use crate::{Error, Result};

/// Inputs of the κ-tempered posterior: `κc_k`, `κo_k` and noise `κZ_k`
/// (variance `κ²σ²`, sensitivity `κΔ`). The guarantee ε is unchanged.
pub fn scaled_inputs(submissions: &[PartySubmission], kappa: f64) -> Result<Vec<PartySubmission>> {
    submissions
        .iter()
        .map(|s| {
            let ss = scale_ss(s.perturbed_ss(), kappa)?;
            let n = s.noise();
            let noise = NoiseSpec::from_parts(
                n.lambda(),
                n.epsilon(),
                kappa * kappa * n.variance(),
                kappa * n.sensitivity(),
            )?;
            Ok(PartySubmission::new(ss, noise))
        })
        .collect()
}

/// One fixed standard-normal realization `e_k` per submission, so that the
/// further-perturbed inputs are a deterministic function of τ.
#[derive(Debug, Clone, PartialEq)]
pub struct FurtherNoise {
    draws: Vec<DVector<f64>>,
}

impl FurtherNoise {
    pub fn draw(submissions: &[PartySubmission], seed: u64) -> Self {
        let draws = submissions
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut rng = stream(seed, &[TAG_FURTHER, k as u64]);
                std_normal_vec(&mut rng, SufficientStatistic::stat_len(s.dim()))
            })
            .collect();
        FurtherNoise { draws }
    }

    /// `t_k = o_k + (½λΔ_k²τ)^{1/2} e_k`; the declared variance grows by
    /// `½λΔ_k²τ` and ε becomes `ε/(1+τε)`.
    pub fn apply(
        &self,
        submissions: &[PartySubmission],
        tau: f64,
        lambda: f64,
    ) -> Result<Vec<PartySubmission>> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::Argument(format!(
                "tau {tau} must be finite and non-negative"
            )));
        }
        if self.draws.len() != submissions.len() {
            return Err(Error::arg(
                "noise realization does not match the submissions",
            ));
        }
        if tau == 0.0 {
            return Ok(submissions.to_vec());
        }
        submissions
            .iter()
            .zip(&self.draws)
            .map(|(s, e)| {
                let n = s.noise();
                let extra = 0.5 * lambda * n.sensitivity() * n.sensitivity() * tau;
                let sd = libm::sqrt(extra);
                let t = s.perturbed_ss().to_vector() + e * sd;
                let ss = SufficientStatistic::from_vector(s.dim(), t.as_slice(), s.count())?;
                let noise = NoiseSpec::from_parts(
                    lambda,
                    strengthened_epsilon(n.epsilon(), tau)?,
                    n.variance() + extra,
                    n.sensitivity(),
                )?;
                Ok(PartySubmission::new(ss, noise))
            })
            .collect()
    }
}

/// [`FurtherNoise::apply`] with a realization drawn from `seed`.
pub fn further_perturbed(
    submissions: &[PartySubmission],
    tau: f64,
    lambda: f64,
    seed: u64,
) -> Result<Vec<PartySubmission>> {
    FurtherNoise::draw(submissions, seed).apply(submissions, tau, lambda)
}
