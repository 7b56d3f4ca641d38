use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, NigBelief, NiwBelief, ThetaSample};
use crate::linalg::{chol_jittered, sample_mvn};
use crate::rng::{stream, TAG_PARTY, TAG_TEST, TAG_THETA};
use crate::{Error, Result};

/// Generative configuration of the synthetic regression benchmark.
///
/// `θ` is drawn from the NIG prior `σ² ~ IG(α₀, β₀)`, `w | σ² ~ N(0, σ²Λ₀⁻¹)`;
/// each party `k` draws its own input distribution `N(μ_k, Σ_k)` from
/// `data_prior` and `c_k` points with `y = wᵀx + N(0, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynConfig {
    alpha0: f64,
    beta0: f64,
    lambda0: DMatrix<f64>,
    counts: Vec<usize>,
    data_prior: NiwBelief,
    input_bound: f64,
    output_bound: f64,
}

impl SynConfig {
    pub fn new(
        alpha0: f64,
        beta0: f64,
        lambda0: DMatrix<f64>,
        counts: Vec<usize>,
        data_prior: NiwBelief,
        input_bound: f64,
        output_bound: f64,
    ) -> Result<Self> {
        if !(alpha0 > 0.0) || !(beta0 > 0.0) {
            return Err(Error::Config(format!(
                "prior shape and scale must be positive (alpha0 = {alpha0}, beta0 = {beta0})"
            )));
        }
        if lambda0.nrows() != lambda0.ncols() || lambda0.nrows() == 0 {
            return Err(Error::Config(
                "prior precision must be a non-empty square matrix".into(),
            ));
        }
        if nalgebra::Cholesky::new(lambda0.clone()).is_none() {
            return Err(Error::Config(
                "prior precision is not positive definite".into(),
            ));
        }
        if data_prior.dim() != lambda0.nrows() {
            return Err(Error::Config(
                "data prior and model prior dimensions differ".into(),
            ));
        }
        if counts.is_empty() {
            return Err(Error::Config("at least one party is required".into()));
        }
        if !(input_bound >= 0.0) || !(output_bound >= 0.0) {
            return Err(Error::Config("bounds must be non-negative".into()));
        }
        Ok(SynConfig {
            alpha0,
            beta0,
            lambda0,
            counts,
            data_prior,
            input_bound,
            output_bound,
        })
    }

    /// The reduced benchmark: `d = 2`, counts `(25, 50, 100)`,
    /// `σ² ~ IG(5, 0.1)`, `Λ₀ = 0.025 I`, input prior `IW(I, 50)` with
    /// `μ ~ N(0, Σ)`.
    pub fn desk() -> Self {
        Self::with_counts(vec![25, 50, 100])
    }

    /// [`Self::desk`] with counts `(100, 200, 400)`.
    pub fn paper_scale() -> Self {
        Self::with_counts(vec![100, 200, 400])
    }

    fn with_counts(counts: Vec<usize>) -> Self {
        let d = 2;
        let niw = NiwBelief::new(DVector::zeros(d), 1.0, DMatrix::identity(d, d), 50.0)
            .expect("constant NIW prior is valid");
        SynConfig::new(
            5.0,
            0.1,
            DMatrix::identity(d, d) * 0.025,
            counts,
            niw,
            DESK_INPUT_BOUND,
            DESK_OUTPUT_BOUND,
        )
        .expect("constant configuration is valid")
    }

    pub fn dim(&self) -> usize {
        self.lambda0.nrows()
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn lambda0(&self) -> &DMatrix<f64> {
        &self.lambda0
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn data_prior(&self) -> &NiwBelief {
        &self.data_prior
    }

    pub fn input_bound(&self) -> f64 {
        self.input_bound
    }

    pub fn output_bound(&self) -> f64 {
        self.output_bound
    }

    /// The model prior `NIG(0, Λ₀⁻¹, α₀, β₀)`, also used for inference.
    pub fn prior(&self) -> NigBelief {
        NigBelief::from_precision(&self.lambda0, self.alpha0, self.beta0)
            .expect("validated at construction")
    }
}

/// Row-norm clip for the reduced benchmark, about three input standard
/// deviations under the default input prior.
pub const DESK_INPUT_BOUND: f64 = 0.5;
/// Output clip for the reduced benchmark.
pub const DESK_OUTPUT_BOUND: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub true_theta: ThetaSample,
    pub partitions: Vec<Dataset>,
    /// Each party's input distribution `(μ_k, Σ_k)`.
    pub input_params: Vec<(DVector<f64>, DMatrix<f64>)>,
}

impl SyntheticData {
    /// A held-out set of `count` points from the equal-weight mixture of the
    /// parties' input distributions, labelled by the true `θ`.
    pub fn test_set(&self, count: usize, seed: u64) -> Result<Dataset> {
        let d = self.true_theta.dim();
        let template = &self.partitions[0];
        let factors = self.input_factors()?;
        let mut rng = stream(seed, &[TAG_TEST]);
        let mut inputs = Vec::with_capacity(count * d);
        let mut outputs = Vec::with_capacity(count);
        for _ in 0..count {
            let k = rng.random_range(0..factors.len());
            let (x, y) = draw_point(
                &mut rng,
                &self.input_params[k].0,
                &factors[k],
                &self.true_theta,
            );
            inputs.extend(x.iter());
            outputs.push(y);
        }
        Dataset::new(
            d,
            inputs,
            outputs,
            template.input_bound(),
            template.output_bound(),
        )
    }

    fn input_factors(&self) -> Result<Vec<DMatrix<f64>>> {
        self.input_params
            .iter()
            .map(|(_, s)| chol_jittered(s).map(|(c, _)| c.unpack()))
            .collect()
    }
}

fn draw_point<R: Rng + ?Sized>(
    rng: &mut R,
    mu: &DVector<f64>,
    l: &DMatrix<f64>,
    theta: &ThetaSample,
) -> (DVector<f64>, f64) {
    let x = sample_mvn(rng, mu, l);
    let noise: f64 = rng.sample(StandardNormal);
    let y = theta.predict(x.as_slice()) + libm::sqrt(theta.sigma2()) * noise;
    (x, y)
}

/// Draw `θ`, the per-party input distributions and the party datasets.
/// Every party uses its own stream, so a party's data do not depend on the
/// other parties' counts.
pub fn generate_synthetic(config: &SynConfig, seed: u64) -> Result<SyntheticData> {
    let d = config.dim();
    let true_theta = config.prior().sample(&mut stream(seed, &[TAG_THETA]));
    let mut partitions = Vec::with_capacity(config.counts.len());
    let mut input_params = Vec::with_capacity(config.counts.len());
    for (k, &c) in config.counts.iter().enumerate() {
        let (mu, sigma) = config
            .data_prior
            .sample(&mut stream(seed, &[TAG_PARTY, k as u64, 0]));
        let mut inputs = Vec::with_capacity(c * d);
        let mut outputs = Vec::with_capacity(c);
        if c > 0 {
            let l = chol_jittered(&sigma)?.0.unpack();
            let mut rng = stream(seed, &[TAG_PARTY, k as u64, 1]);
            for _ in 0..c {
                let (x, y) = draw_point(&mut rng, &mu, &l, &true_theta);
                inputs.extend(x.iter());
                outputs.push(y);
            }
        }
        partitions.push(Dataset::new(
            d,
            inputs,
            outputs,
            config.input_bound,
            config.output_bound,
        )?);
        input_params.push((mu, sigma));
    }
    Ok(SyntheticData {
        true_theta,
        partitions,
        input_params,
    })
}
