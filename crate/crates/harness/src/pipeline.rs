//! One run of the incentive pipeline per (ε point, noise seed): perturb,
//! value every coalition, split rewards, solve reward controls and score
//! models.
//!
//! Every random stream is derived from the master seed and the noise seed
//! index, never from the ε point, so a sweep uses common random numbers:
//! the same data, standard-normal noise draws, sampler streams and prior
//! samples at every ε.

use dpcollab_core::divergence::{FoldEstimate, KlOptions};
use dpcollab_core::inference::noise_naive_posterior;
use dpcollab_core::metrics::mnlp;
use dpcollab_core::model::{generate_synthetic, SynConfig, SyntheticData};
use dpcollab_core::privacy::{NoiseSpec, PartySubmission};
use dpcollab_core::reward::{
    similarity, solve_kappa, solve_tau, RewardContext, RewardSolution, SolveOptions,
};
use dpcollab_core::rng::derive_seed;
use dpcollab_core::suffstat::sensitivity_bound;
use dpcollab_core::valuation::{
    alt_valuation, rho_shapley_targets, rho_upper_bound, shapley, value_all_coalitions,
    CoalitionEstimate, RhoBound, Valuation,
};
use dpcollab_core::{Dataset, Error, NigBelief, Result, ThetaSampleSet};
use rayon::prelude::*;

use crate::config::ExperimentConfig;

const TAG_DATA: u64 = 0xDA7A;
const TAG_NOISE: u64 = 0x0153;
const TAG_SAMPLER: u64 = 0x5A3F;
const TAG_PRIOR_SET: u64 = 0x9A10;
const TAG_REWARD: u64 = 0x7E3D;
const TAG_TEST_SET: u64 = 0x7E57;
const TAG_NAIVE: u64 = 0x4A1E;

/// How far a run goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Value,
    Reward,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub run_id: usize,
    pub epsilon: f64,
    pub noise_index: usize,
}

/// Every (ε, noise seed) pair of a sweep, ε-major.
pub fn sweep_jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &epsilon in &cfg.privacy.sweep_grid {
        for noise_index in 0..cfg.seeds.noise_repeats {
            jobs.push(Job {
                run_id: jobs.len(),
                epsilon,
                noise_index,
            });
        }
    }
    jobs
}

/// The single run used by `value`, `reward` and `eval`: the configured
/// budgets and the first noise seed.
pub fn single_job(cfg: &ExperimentConfig) -> Job {
    Job {
        run_id: 0,
        epsilon: cfg.privacy.epsilons[cfg.privacy.sweep_party - 1],
        noise_index: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismKind {
    Temper,
    Noise,
}

impl MechanismKind {
    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Temper => "temper",
            MechanismKind::Noise => "noise",
        }
    }

    fn model(self) -> &'static str {
        match self {
            MechanismKind::Temper => "reward",
            MechanismKind::Noise => "reward_noise",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RewardOutcome {
    /// 0-based party.
    pub party: usize,
    pub mechanism: MechanismKind,
    pub target: f64,
    /// `None` when the τ search found no root.
    pub solution: Option<RewardSolution>,
    /// Fold-averaged `r′`.
    pub similarity: Option<FoldEstimate>,
    /// `(τ, r)` trace of a failed τ search.
    pub no_root_trace: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct MnlpOutcome {
    /// 1-based party, 0 for run-level models.
    pub party: usize,
    pub model: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct JobOutput {
    pub job: Job,
    /// `master:noise_index`.
    pub seed: String,
    pub coalitions: Vec<CoalitionEstimate>,
    pub shapley: Vec<f64>,
    /// `None` when no Shapley value is positive.
    pub targets: Option<Vec<f64>>,
    pub rho: f64,
    pub rho_bound: RhoBound,
    pub rewards: Vec<RewardOutcome>,
    pub mnlp: Vec<MnlpOutcome>,
    /// `v′_C` by mask (index 0 is the empty coalition) when requested.
    pub alt: Option<Vec<FoldEstimate>>,
}

impl JobOutput {
    pub fn grand_value(&self) -> f64 {
        self.coalitions.last().map_or(0.0, |c| c.value.mean)
    }
}

/// Everything fixed for a configuration.
pub struct Pipeline {
    pub cfg: ExperimentConfig,
    pub syn: SynConfig,
    pub prior: NigBelief,
    pub sensitivity: f64,
    /// Dataset and test set shared by all runs unless data vary per seed.
    shared: Option<(SyntheticData, Dataset)>,
    pub alt_valuation: bool,
}

impl Pipeline {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let syn = cfg.syn()?;
        let prior = syn.prior();
        let sensitivity = sensitivity_bound(syn.dim(), syn.input_bound(), syn.output_bound())?;
        let mut p = Pipeline {
            cfg,
            syn,
            prior,
            sensitivity,
            shared: None,
            alt_valuation: false,
        };
        if !p.cfg.data.vary_per_seed {
            p.shared = Some(p.draw_data(0)?);
        }
        Ok(p)
    }

    /// Also compute the alternative valuation of every coalition.
    pub fn with_alt_valuation(mut self) -> Self {
        self.alt_valuation = true;
        self
    }

    fn master(&self) -> u64 {
        self.cfg.seeds.master
    }

    fn draw_data(&self, noise_index: usize) -> Result<(SyntheticData, Dataset)> {
        let tags: &[u64] = if self.cfg.data.vary_per_seed {
            &[TAG_DATA, noise_index as u64]
        } else {
            &[TAG_DATA]
        };
        let data = generate_synthetic(&self.syn, derive_seed(self.master(), tags))?;
        let test = data.test_set(
            self.cfg.data.test_points,
            derive_seed(
                self.master(),
                &[TAG_TEST_SET, tags.len() as u64, noise_index as u64],
            ),
        )?;
        Ok((data, test))
    }

    /// The dataset and test set of a noise seed.
    pub fn data(&self, noise_index: usize) -> Result<(SyntheticData, Dataset)> {
        match &self.shared {
            Some(d) => Ok(d.clone()),
            None => self.draw_data(noise_index),
        }
    }

    /// Perturbed submissions at the budgets for `epsilon`.
    pub fn submissions(
        &self,
        data: &SyntheticData,
        epsilon: f64,
        noise_index: usize,
    ) -> Result<Vec<PartySubmission>> {
        let noise_seed = derive_seed(self.master(), &[TAG_NOISE, noise_index as u64]);
        data.partitions
            .iter()
            .zip(self.cfg.epsilons_at(epsilon))
            .enumerate()
            .map(|(k, (part, eps))| {
                let noise = NoiseSpec::gaussian(self.cfg.privacy.lambda, eps, self.sensitivity)?;
                Ok(PartySubmission::from_dataset(
                    part,
                    noise,
                    derive_seed(noise_seed, &[k as u64]),
                ))
            })
            .collect()
    }

    fn kl(&self, repeats: usize) -> KlOptions {
        KlOptions {
            k: self.cfg.valuation.k,
            repeats,
        }
    }

    pub fn value(&self, subs: &[PartySubmission], noise_index: usize) -> Result<Valuation> {
        let gibbs = self.cfg.gibbs(derive_seed(
            self.master(),
            &[TAG_SAMPLER, noise_index as u64],
        ));
        let m = self
            .cfg
            .valuation
            .prior_samples
            .unwrap_or_else(|| gibbs.total_samples());
        let prior_samples = self.prior.sample_set(
            m,
            derive_seed(self.master(), &[TAG_PRIOR_SET, noise_index as u64]),
        )?;
        value_all_coalitions(
            &self.prior,
            self.syn.data_prior(),
            subs,
            &gibbs,
            prior_samples,
            self.kl(self.cfg.valuation.kl_repeats),
        )
    }

    pub fn run(&self, job: Job, stage: Stage) -> Result<JobOutput> {
        let (data, test) = self.data(job.noise_index)?;
        let subs = self.submissions(&data, job.epsilon, job.noise_index)?;
        let val = self.value(&subs, job.noise_index)?;
        let values = val.values();
        let phi = shapley(&values);
        let rho = self.cfg.reward.rho;
        let rho_bound = rho_upper_bound(&values, &phi);
        let targets = match rho_shapley_targets(&values, &phi, rho) {
            Ok(t) => Some(t),
            Err(e) => {
                log::warn!("run {}: no reward targets: {e}", job.run_id);
                None
            }
        };
        let alt = if self.alt_valuation {
            let kl = self.kl(self.cfg.valuation.kl_repeats);
            Some(
                val.samples
                    .iter()
                    .map(|s| alt_valuation(val.grand_samples(), s, &val.prior_samples, kl))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let mut out = JobOutput {
            job,
            seed: format!("{}:{}", self.master(), job.noise_index),
            coalitions: val.estimates.clone(),
            shapley: phi,
            targets: targets.clone(),
            rho,
            rho_bound,
            rewards: Vec::new(),
            mnlp: Vec::new(),
            alt,
        };
        if stage >= Stage::Reward {
            if let Some(t) = &targets {
                out.rewards = self.rewards(&val, &subs, t, job.noise_index)?;
            }
        }
        if stage >= Stage::Eval {
            out.mnlp = self.evaluate(&val, &subs, &out.rewards, &test, job.noise_index)?;
        }
        Ok(out)
    }

    fn rewards(
        &self,
        val: &Valuation,
        subs: &[PartySubmission],
        targets: &[f64],
        noise_index: usize,
    ) -> Result<Vec<RewardOutcome>> {
        let r = &self.cfg.reward;
        let grand_value = val.estimates.last().expect("grand coalition").value.mean;
        let ctx = RewardContext {
            prior: &self.prior,
            data_prior: self.syn.data_prior(),
            submissions: subs,
            gibbs: self.cfg.gibbs(0),
            prior_samples: &val.prior_samples,
            grand_samples: val.grand_samples(),
            grand_value,
            lambda: self.cfg.privacy.lambda,
            k: self.cfg.valuation.k,
            inner_repeats: r.inner_repeats,
            final_repeats: self.cfg.valuation.kl_repeats,
        };
        let opts = SolveOptions {
            tol: (r.tol_fraction * grand_value).max(1e-9),
            max_iters: r.max_iters,
            tau_max: r.tau_max,
            tau_grid: r.tau_grid,
        };
        let mut tasks = Vec::new();
        for i in self.cfg.reward_parties() {
            if r.mechanism.temper() {
                tasks.push((i, MechanismKind::Temper));
            }
            if r.mechanism.noise() {
                tasks.push((i, MechanismKind::Noise));
            }
        }
        let kl = self.kl(self.cfg.valuation.kl_repeats);
        tasks
            .into_par_iter()
            .map(|(i, mech)| {
                let seed = derive_seed(self.master(), &[TAG_REWARD, noise_index as u64, i as u64]);
                let solved = match mech {
                    MechanismKind::Temper => solve_kappa(&ctx, targets[i], &opts, seed),
                    MechanismKind::Noise => solve_tau(&ctx, targets[i], &opts, seed),
                };
                let mut outcome = RewardOutcome {
                    party: i,
                    mechanism: mech,
                    target: targets[i],
                    solution: None,
                    similarity: None,
                    no_root_trace: None,
                };
                match solved {
                    Ok(sol) => {
                        outcome.similarity =
                            Some(similarity(val.grand_samples(), &sol.samples, kl)?);
                        outcome.solution = Some(sol);
                    }
                    Err(Error::NoRoot { target, trace }) => {
                        log::warn!("party {}: no tau attains {target}", i + 1);
                        outcome.no_root_trace = Some(trace);
                    }
                    Err(e) => return Err(e),
                }
                Ok(outcome)
            })
            .collect()
    }

    fn evaluate(
        &self,
        val: &Valuation,
        subs: &[PartySubmission],
        rewards: &[RewardOutcome],
        test: &Dataset,
        noise_index: usize,
    ) -> Result<Vec<MnlpOutcome>> {
        let mut out = Vec::new();
        for i in 0..subs.len() {
            out.push(MnlpOutcome {
                party: i + 1,
                model: "solo",
                value: mnlp(&val.samples[1 << i], test)?,
            });
            for r in rewards.iter().filter(|r| r.party == i) {
                let value = match &r.solution {
                    Some(sol) => mnlp(&sol.samples, test)?,
                    None => f64::NAN,
                };
                out.push(MnlpOutcome {
                    party: i + 1,
                    model: r.mechanism.model(),
                    value,
                });
            }
        }
        out.push(MnlpOutcome {
            party: 0,
            model: "grand",
            value: mnlp(val.grand_samples(), test)?,
        });
        out.push(MnlpOutcome {
            party: 0,
            model: "prior",
            value: mnlp(&val.prior_samples, test)?,
        });
        out.push(MnlpOutcome {
            party: 0,
            model: "naive",
            value: self.naive_mnlp(subs, val.prior_samples.len(), test, noise_index)?,
        });
        Ok(out)
    }

    /// The noise-naive posterior can be improper when noise swamps the
    /// statistics; its MNLP is then NaN.
    fn naive_mnlp(
        &self,
        subs: &[PartySubmission],
        m: usize,
        test: &Dataset,
        noise_index: usize,
    ) -> Result<f64> {
        match noise_naive_posterior(&self.prior, subs) {
            Ok(belief) => {
                let samples: ThetaSampleSet = belief.sample_set(
                    m,
                    derive_seed(self.master(), &[TAG_NAIVE, noise_index as u64]),
                )?;
                mnlp(&samples, test)
            }
            Err(e @ (Error::DegeneratePosterior(_) | Error::Numerical(_))) => {
                log::warn!("noise-naive posterior unavailable: {e}");
                Ok(f64::NAN)
            }
            Err(e) => Err(e),
        }
    }

    /// Run jobs in parallel; results are in job order.
    pub fn run_all(&self, jobs: &[Job], stage: Stage) -> Result<Vec<JobOutput>> {
        jobs.par_iter()
            .map(|&job| {
                let out = self.run(job, stage);
                log::info!(
                    "run {} (epsilon {}, seed {}) done",
                    job.run_id,
                    job.epsilon,
                    job.noise_index
                );
                out
            })
            .collect()
    }
}
