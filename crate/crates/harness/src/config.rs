//! Experiment configuration: one JSON document with every default embedded.

use dpcollab_core::inference::GibbsConfig;
use dpcollab_core::model::SynConfig;
use dpcollab_core::valuation::MAX_PARTIES;
use dpcollab_core::{Error as CoreError, NiwBelief};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub prior: PriorBlock,
    pub data: DataBlock,
    pub privacy: PrivacyBlock,
    pub sampler: SamplerBlock,
    pub valuation: ValuationBlock,
    pub reward: RewardBlock,
    pub seeds: SeedBlock,
}

/// `σ² ~ IG(alpha0, beta0)`, `w | σ² ~ N(0, σ²(lambda0_scale·I)⁻¹)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorBlock {
    pub alpha0: f64,
    pub beta0: f64,
    pub lambda0_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataBlock {
    pub dim: usize,
    pub counts: Vec<usize>,
    pub input_bound: f64,
    pub output_bound: f64,
    pub niw: NiwBlock,
    pub test_points: usize,
    /// Redraw `θ` and the datasets for every noise seed instead of keeping
    /// one dataset per master seed.
    pub vary_per_seed: bool,
}

/// `μ ~ N(mu0, Σ/kappa0)`, `Σ ~ IW(psi_scale·I, nu0)`; `mu0` defaults to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NiwBlock {
    pub mu0: Option<Vec<f64>>,
    pub kappa0: f64,
    pub psi_scale: f64,
    pub nu0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacyBlock {
    /// Rényi order.
    pub lambda: f64,
    /// Per-party budgets; the sweep party's entry is used outside sweeps.
    pub epsilons: Vec<f64>,
    /// 1-based index of the party whose budget is swept.
    pub sweep_party: usize,
    pub sweep_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerBlock {
    pub chains: usize,
    pub burn_in: usize,
    pub samples_per_chain: usize,
    pub thin: usize,
    pub shared_data_prior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValuationBlock {
    pub k: usize,
    pub kl_repeats: usize,
    /// Prior samples shared by all coalitions; defaults to the posterior
    /// sample count.
    pub prior_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Temper,
    Noise,
    Both,
}

impl Mechanism {
    pub fn temper(self) -> bool {
        matches!(self, Mechanism::Temper | Mechanism::Both)
    }

    pub fn noise(self) -> bool {
        matches!(self, Mechanism::Noise | Mechanism::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardBlock {
    pub rho: f64,
    pub mechanism: Mechanism,
    /// 1-based parties to reward; all when absent.
    pub parties: Option<Vec<usize>>,
    /// Solver tolerance as a fraction of `v_N`.
    pub tol_fraction: f64,
    pub max_iters: usize,
    pub tau_max: f64,
    pub tau_grid: usize,
    /// Folds per evaluation inside a solve.
    pub inner_repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedBlock {
    pub master: u64,
    pub noise_repeats: usize,
}

impl Default for PriorBlock {
    fn default() -> Self {
        PriorBlock {
            alpha0: 5.0,
            beta0: 0.1,
            lambda0_scale: 0.025,
        }
    }
}

impl Default for DataBlock {
    fn default() -> Self {
        DataBlock {
            dim: 2,
            counts: vec![25, 50, 100],
            input_bound: dpcollab_core::model::DESK_INPUT_BOUND,
            output_bound: dpcollab_core::model::DESK_OUTPUT_BOUND,
            niw: NiwBlock::default(),
            test_points: 500,
            vary_per_seed: false,
        }
    }
}

impl Default for NiwBlock {
    fn default() -> Self {
        NiwBlock {
            mu0: None,
            kappa0: 1.0,
            psi_scale: 1.0,
            nu0: 50.0,
        }
    }
}

impl Default for PrivacyBlock {
    fn default() -> Self {
        PrivacyBlock {
            lambda: 2.0,
            epsilons: vec![0.2, 0.1, 0.2],
            sweep_party: 2,
            sweep_grid: vec![0.004, 0.02, 0.1, 0.5, 2.5, 12.5],
        }
    }
}

impl Default for SamplerBlock {
    fn default() -> Self {
        let g = GibbsConfig::desk(0);
        SamplerBlock {
            chains: g.chains,
            burn_in: g.burn_in,
            samples_per_chain: g.samples_per_chain,
            thin: g.thin,
            shared_data_prior: g.shared_data_prior,
        }
    }
}

impl Default for ValuationBlock {
    fn default() -> Self {
        ValuationBlock {
            k: 4,
            kl_repeats: 5,
            prior_samples: None,
        }
    }
}

impl Default for RewardBlock {
    fn default() -> Self {
        RewardBlock {
            rho: 0.2,
            mechanism: Mechanism::Temper,
            parties: None,
            tol_fraction: 0.05,
            max_iters: 12,
            tau_max: 100.0,
            tau_grid: 16,
            inner_repeats: 3,
        }
    }
}

impl Default for SeedBlock {
    fn default() -> Self {
        SeedBlock {
            master: 20_240_601,
            noise_repeats: 20,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CoreError {
    CoreError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Large party sizes.
    pub fn paper_scale(mut self) -> Self {
        self.data.counts = SynConfig::paper_scale().counts().to_vec();
        self
    }

    pub fn parties(&self) -> usize {
        self.data.counts.len()
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let n = self.parties();
        if n == 0 || n > MAX_PARTIES {
            return Err(invalid(format!("{n} parties outside 1..={MAX_PARTIES}")));
        }
        if self.data.dim == 0 {
            return Err(invalid("input dimension must be positive"));
        }
        if let Some(mu0) = &self.data.niw.mu0 {
            if mu0.len() != self.data.dim {
                return Err(invalid("niw.mu0 length differs from the input dimension"));
            }
        }
        if self.privacy.epsilons.len() != n {
            return Err(invalid(format!(
                "{} budgets for {n} parties",
                self.privacy.epsilons.len()
            )));
        }
        if self.privacy.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("every budget must be positive"));
        }
        if !(self.privacy.lambda > 1.0) {
            return Err(invalid("the Rényi order must exceed 1"));
        }
        if self.privacy.sweep_party == 0 || self.privacy.sweep_party > n {
            return Err(invalid(format!(
                "sweep party {} outside 1..={n}",
                self.privacy.sweep_party
            )));
        }
        let grid = &self.privacy.sweep_grid;
        if grid.is_empty()
            || grid.iter().any(|e| !(*e > 0.0))
            || grid.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(invalid(
                "sweep grid must be non-empty, positive and strictly increasing",
            ));
        }
        if !(self.reward.rho > 0.0 && self.reward.rho <= 1.0) {
            return Err(invalid(format!("rho {} outside (0, 1]", self.reward.rho)));
        }
        if let Some(ps) = &self.reward.parties {
            if ps.is_empty() || ps.iter().any(|p| *p == 0 || *p > n) {
                return Err(invalid(
                    "reward parties must be 1-based indices of existing parties",
                ));
            }
        }
        if !(self.reward.tol_fraction > 0.0) || self.reward.max_iters == 0 {
            return Err(invalid(
                "solver tolerance and iteration cap must be positive",
            ));
        }
        if !(self.reward.tau_max > 0.0) || self.reward.tau_grid < 2 {
            return Err(invalid(
                "tau search needs a positive upper end and at least two grid points",
            ));
        }
        if self.valuation.k == 0 || self.valuation.kl_repeats < 2 || self.reward.inner_repeats == 0
        {
            return Err(invalid(
                "k must be positive, kl_repeats at least 2 and inner_repeats at least 1",
            ));
        }
        if self.seeds.noise_repeats == 0 || self.data.test_points == 0 {
            return Err(invalid("noise repeats and test points must be positive"));
        }
        self.gibbs(0).validate()?;
        if let Some(m) = self.valuation.prior_samples {
            if m < self.valuation.kl_repeats * (self.valuation.k + 1) {
                return Err(invalid("too few prior samples for the fold count"));
            }
        }
        self.syn()?;
        Ok(())
    }

    /// Generative configuration with `counts`.
    pub fn syn(&self) -> Result<SynConfig, CoreError> {
        let d = self.data.dim;
        let mu0 = self
            .data
            .niw
            .mu0
            .clone()
            .map(DVector::from_vec)
            .unwrap_or_else(|| DVector::zeros(d));
        let niw = NiwBelief::new(
            mu0,
            self.data.niw.kappa0,
            DMatrix::identity(d, d) * self.data.niw.psi_scale,
            self.data.niw.nu0,
        )
        .map_err(|e| invalid(format!("data prior: {e}")))?;
        SynConfig::new(
            self.prior.alpha0,
            self.prior.beta0,
            DMatrix::identity(d, d) * self.prior.lambda0_scale,
            self.data.counts.clone(),
            niw,
            self.data.input_bound,
            self.data.output_bound,
        )
    }

    pub fn gibbs(&self, seed: u64) -> GibbsConfig {
        GibbsConfig {
            chains: self.sampler.chains,
            burn_in: self.sampler.burn_in,
            samples_per_chain: self.sampler.samples_per_chain,
            thin: self.sampler.thin,
            shared_data_prior: self.sampler.shared_data_prior,
            seed,
        }
    }

    /// Budgets with the sweep party's entry replaced by `eps`.
    pub fn epsilons_at(&self, eps: f64) -> Vec<f64> {
        let mut e = self.privacy.epsilons.clone();
        e[self.privacy.sweep_party - 1] = eps;
        e
    }

    /// 0-based indices of the rewarded parties.
    pub fn reward_parties(&self) -> Vec<usize> {
        match &self.reward.parties {
            Some(ps) => ps.iter().map(|p| p - 1).collect(),
            None => (0..self.parties()).collect(),
        }
    }
}
