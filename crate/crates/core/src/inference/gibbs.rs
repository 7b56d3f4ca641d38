use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::moments::{moments_into, product_pairs, MomentPair};
use super::product::gaussian_product;
use super::Conjugate;
use crate::linalg::{chol_jittered, sample_mvn};
use crate::model::{
    sample_inv_wishart, sample_mean, unvech, NigBelief, NiwBelief, Provenance, SampleSource,
    SufficientStatistic, ThetaSample, ThetaSampleSet,
};
use crate::privacy::PartySubmission;
use crate::rng::{stream, SimRng, TAG_CHAIN};
use crate::{par, Error, Result};

/// Redraws of a sweep's latent statistics before falling back to their
/// conditional means.
const MAX_LATENT_RETRIES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsConfig {
    pub chains: usize,
    pub burn_in: usize,
    /// Post-burn-in sweeps per chain; every `thin`-th one is kept.
    pub samples_per_chain: usize,
    pub thin: usize,
    /// One input distribution for all parties instead of one per party.
    pub shared_data_prior: bool,
    pub seed: u64,
}

impl GibbsConfig {
    /// 4 chains, 500 burn-in sweeps, 4000 sweeps thinned by 4: 4000 samples.
    pub fn desk(seed: u64) -> Self {
        GibbsConfig {
            chains: 4,
            burn_in: 500,
            samples_per_chain: 4000,
            thin: 4,
            shared_data_prior: false,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        GibbsConfig { seed, ..self }
    }

    pub fn kept_per_chain(&self) -> usize {
        self.samples_per_chain / self.thin.max(1)
    }

    pub fn total_samples(&self) -> usize {
        self.chains * self.kept_per_chain()
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.samples_per_chain == 0 || self.thin == 0 {
            return Err(Error::Config(
                "chains, samples per chain and thinning must be positive".into(),
            ));
        }
        if self.samples_per_chain < self.thin {
            return Err(Error::Config("thinning keeps no samples".into()));
        }
        Ok(())
    }

    fn provenance(&self, retries: u64) -> Provenance {
        Provenance {
            source: SampleSource::Gibbs,
            chains: self.chains,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            retries,
        }
    }
}

/// Samples from the noise-aware posterior `p(θ | o_1..o_n)`.
///
/// Each sweep draws, per party, the latent exact statistic `s_i` from the
/// product of its CLT approximation `N(c_i μ_g, c_i Σ_g)` under the current
/// `(θ, ω_i)` with the noise likelihood `N(o_i, σ_z² I)`, then updates `θ`
/// by the conjugate NIG step on `Σ s_i` and each input distribution `ω` by
/// the NIW step.
///
/// The NIW step sees only the count and `XᵀX` of a latent statistic, not
/// `Σx`. It treats the unobserved input mean as equal to `μ₀`, which gives
/// `Ψₙ = Ψ₀ + XᵀX − cμ₀μ₀ᵀ`, `νₙ = ν₀ + c`, `κₙ = κ₀ + c`, `μₙ = μ₀`.
///
/// The total of exact statistics is a Gram matrix of `(y, x)` rows, so the
/// latent draws of a sweep are redrawn until their sum has a positive
/// definite `[[yy, xyᵀ], [xy, XᵀX]]`. This keeps the posterior precision
/// above the prior's and the posterior scale above `b₀`. After
/// [`MAX_LATENT_RETRIES`] rejections the sweep uses the conditional means
/// of the latents, or the CLT means `c μ_g` if their sum is not realizable
/// either. Redraws are counted in the provenance's `retries`.
///
/// An empty submission list yields prior draws.
pub fn gibbs_noise_aware(
    prior: &NigBelief,
    data_prior: &NiwBelief,
    submissions: &[PartySubmission],
    config: &GibbsConfig,
) -> Result<ThetaSampleSet> {
    config.validate()?;
    let d = prior.dim();
    if data_prior.dim() != d || submissions.iter().any(|s| s.dim() != d) {
        return Err(Error::arg(
            "prior, data prior and submissions differ in dimension",
        ));
    }
    if submissions.is_empty() {
        let per = config.kept_per_chain();
        let chains = par::map(config.chains, |j| {
            let mut rng = stream(config.seed, &[TAG_CHAIN, j as u64]);
            (0..per).map(|_| prior.sample(&mut rng)).collect::<Vec<_>>()
        });
        return ThetaSampleSet::new(chains.concat(), config.provenance(0));
    }
    let ctx = Chain {
        conj: Conjugate::new(prior),
        prior,
        data_prior,
        submissions,
        config,
        pairs: product_pairs(d),
        obs: submissions
            .iter()
            .map(|s| s.perturbed_ss().to_vector())
            .collect(),
        total_count: submissions.iter().map(|s| s.count()).sum(),
    };
    let runs = par::map(config.chains, |j| ctx.run(j));
    let mut samples = Vec::with_capacity(config.total_samples());
    let mut retries = 0;
    for run in runs {
        let (s, r) = run?;
        samples.extend(s);
        retries += r;
    }
    if retries > 0 {
        log::debug!(
            "gibbs: {retries} latent redraws across {} chains",
            config.chains
        );
    }
    ThetaSampleSet::new(samples, config.provenance(retries))
}

struct Chain<'a> {
    conj: Conjugate,
    prior: &'a NigBelief,
    data_prior: &'a NiwBelief,
    submissions: &'a [PartySubmission],
    config: &'a GibbsConfig,
    pairs: Vec<(usize, usize)>,
    obs: Vec<DVector<f64>>,
    total_count: f64,
}

type Omega = (DVector<f64>, DMatrix<f64>);

impl Chain<'_> {
    fn run(&self, chain: usize) -> Result<(Vec<ThetaSample>, u64)> {
        let cfg = self.config;
        let d = self.prior.dim();
        let n = self.submissions.len();
        let m = SufficientStatistic::stat_len(d);
        let mut rng = stream(cfg.seed, &[TAG_CHAIN, chain as u64]);
        let mut theta = self.prior.sample(&mut rng);
        let groups = if cfg.shared_data_prior { 1 } else { n };
        let mut omegas: Vec<Omega> = (0..groups)
            .map(|_| self.data_prior.sample(&mut rng))
            .collect();
        let mut latents = vec![DVector::<f64>::zeros(m); n];
        let mut moments = MomentPair {
            mu_g: DVector::zeros(m),
            sigma_g: DMatrix::zeros(m, m),
        };
        let mut kept = Vec::with_capacity(cfg.kept_per_chain());
        let mut retries = 0u64;
        let sweeps = cfg.burn_in + cfg.samples_per_chain;
        let mut means = vec![DVector::<f64>::zeros(m); n];
        let mut anchors = vec![DVector::<f64>::zeros(m); n];
        for sweep in 0..sweeps {
            let mut attempt = 0;
            let total = loop {
                self.draw_latents(
                    &theta,
                    &omegas,
                    &mut moments,
                    &mut latents,
                    &mut means,
                    &mut anchors,
                    &mut rng,
                )?;
                let sum = sum_of(&latents, m);
                if self.realizable_total(&sum, d) {
                    break sum;
                }
                attempt += 1;
                retries += 1;
                if attempt >= MAX_LATENT_RETRIES {
                    let sum = sum_of(&means, m);
                    if self.realizable_total(&sum, d) {
                        latents.clone_from(&means);
                        break sum;
                    }
                    latents.clone_from(&anchors);
                    break sum_of(&anchors, m);
                }
            };
            let update = SufficientStatistic::from_vector(d, total.as_slice(), self.total_count)
                .and_then(|ss| self.conj.update(&ss))
                .map_err(|e| Error::Sampler {
                    chain,
                    sweep,
                    reason: e.to_string(),
                })?;
            theta = update.sample(&mut rng);
            self.update_omegas(&mut omegas, &latents, &mut rng)
                .map_err(|e| Error::Sampler {
                    chain,
                    sweep,
                    reason: e.to_string(),
                })?;
            if sweep >= cfg.burn_in && (sweep - cfg.burn_in + 1) % cfg.thin == 0 {
                kept.push(theta.clone());
            }
        }
        Ok((kept, retries))
    }

    /// Per party: a draw from the latent conditional, its mean, and the
    /// CLT mean `c μ_g`.
    #[allow(clippy::too_many_arguments)]
    fn draw_latents(
        &self,
        theta: &ThetaSample,
        omegas: &[Omega],
        moments: &mut MomentPair,
        latents: &mut [DVector<f64>],
        means: &mut [DVector<f64>],
        anchors: &mut [DVector<f64>],
        rng: &mut SimRng,
    ) -> Result<()> {
        for (i, sub) in self.submissions.iter().enumerate() {
            let c = sub.count();
            let (mu, sigma) = &omegas[if self.config.shared_data_prior { 0 } else { i }];
            moments_into(theta.w(), theta.sigma2(), mu, sigma, &self.pairs, moments);
            anchors[i] = &moments.mu_g * c;
            let (mean, cov) = gaussian_product(
                &anchors[i],
                &(&moments.sigma_g * c),
                &self.obs[i],
                sub.noise().variance(),
            )?;
            let draw = if cov.iter().all(|v| *v == 0.0) {
                mean.clone()
            } else {
                let (l, _) = chol_jittered(&cov)?;
                sample_mvn(rng, &mean, &l.unpack())
            };
            if draw.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite latent statistic".into()));
            }
            latents[i] = draw;
            means[i] = mean;
        }
        Ok(())
    }

    /// A zero total (no data) is realizable; otherwise its Gram matrix must
    /// be positive definite.
    fn realizable_total(&self, total: &DVector<f64>, d: usize) -> bool {
        self.total_count == 0.0 || realizable(total, d)
    }

    fn update_omegas(
        &self,
        omegas: &mut [Omega],
        latents: &[DVector<f64>],
        rng: &mut SimRng,
    ) -> Result<()> {
        let d = self.prior.dim();
        if self.config.shared_data_prior {
            let sum = latents
                .iter()
                .fold(DVector::zeros(latents[0].len()), |acc, s| acc + s);
            omegas[0] = self.niw_step(&sum, self.total_count, d, rng)?;
        } else {
            for (i, s) in latents.iter().enumerate() {
                omegas[i] = self.niw_step(s, self.submissions[i].count(), d, rng)?;
            }
        }
        Ok(())
    }

    fn niw_step(
        &self,
        latent: &DVector<f64>,
        count: f64,
        d: usize,
        rng: &mut SimRng,
    ) -> Result<Omega> {
        let np = self.data_prior;
        let xx = unvech(d, &latent.as_slice()[1 + d..]);
        let psi = np.psi() + xx - np.mu0() * np.mu0().transpose() * count;
        if nalgebra::Cholesky::new(psi.clone()).is_none() {
            // latent XᵀX too indefinite to carry information: redraw from the prior
            return Ok(np.sample(rng));
        }
        let sigma = sample_inv_wishart(rng, &psi, np.nu() + count)?;
        let mu = sample_mean(rng, np.mu0(), &sigma, np.kappa0() + count)?;
        Ok((mu, sigma))
    }
}

/// `[[yy, xyᵀ], [xy, XᵀX]]` of a statistic vector.
fn gram(s: &DVector<f64>, d: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(d + 1, d + 1);
    g[(0, 0)] = s[0];
    for j in 0..d {
        g[(0, j + 1)] = s[1 + j];
        g[(j + 1, 0)] = s[1 + j];
    }
    g.view_mut((1, 1), (d, d))
        .copy_from(&unvech(d, &s.as_slice()[1 + d..]));
    g
}

fn realizable(s: &DVector<f64>, d: usize) -> bool {
    nalgebra::Cholesky::new(gram(s, d)).is_some()
}

fn sum_of(parts: &[DVector<f64>], m: usize) -> DVector<f64> {
    parts.iter().fold(DVector::zeros(m), |acc, s| acc + s)
}
