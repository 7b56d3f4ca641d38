//! Coalition values, Shapley values and ρ-Shapley reward targets.
//!
//! Coalitions are bitmasks over parties `0..n`: bit `i` set means party `i`
//! is a member. Values are indexed by mask, so `values[0]` is `v_∅`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::divergence::{
    cross_fold_raw, knn_kl_raw, mean_and_se, surprise_k, FoldEstimate, KlOptions, Surprise,
};
use crate::inference::{gibbs_noise_aware, GibbsConfig};
use crate::model::{NigBelief, NiwBelief, ThetaSampleSet};
use crate::privacy::PartySubmission;
use crate::{par, Error, Result};

/// Largest party count for exact enumeration.
pub const MAX_PARTIES: usize = 20;

/// A complete value map `mask → v_C` over `n` parties.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionValues {
    n: usize,
    values: Vec<f64>,
}

impl CoalitionValues {
    /// `values[mask]` for all `2ⁿ` masks.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || n > MAX_PARTIES {
            return Err(Error::Argument(format!(
                "{n} parties outside 1..={MAX_PARTIES}"
            )));
        }
        if values.len() != 1 << n {
            return Err(Error::Argument(format!(
                "{} values for {} coalitions",
                values.len(),
                1usize << n
            )));
        }
        Ok(CoalitionValues { n, values })
    }

    /// From a sparse map; every one of the `2ⁿ` subsets must be present.
    pub fn from_map(n: usize, map: &BTreeMap<u32, f64>) -> Result<Self> {
        if n == 0 || n > MAX_PARTIES {
            return Err(Error::Argument(format!(
                "{n} parties outside 1..={MAX_PARTIES}"
            )));
        }
        let values = (0..1u32 << n)
            .map(|mask| {
                map.get(&mask).copied().ok_or_else(|| {
                    Error::Argument(format!("value of coalition {mask:#b} is missing"))
                })
            })
            .collect::<Result<_>>()?;
        Self::new(n, values)
    }

    pub fn parties(&self) -> usize {
        self.n
    }

    pub fn get(&self, mask: u32) -> f64 {
        self.values[mask as usize]
    }

    pub fn grand(&self) -> f64 {
        self.values[(1usize << self.n) - 1]
    }

    /// `v_{{i}}`.
    pub fn solo(&self, i: usize) -> f64 {
        self.values[1 << i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Estimated value of one coalition.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionEstimate {
    pub mask: u32,
    pub value: Surprise,
}

/// Output of [`value_all_coalitions`]: estimates and sample sets by mask
/// (index 0, the empty coalition, has value 0 and the prior samples).
#[derive(Debug, Clone)]
pub struct Valuation {
    pub estimates: Vec<CoalitionEstimate>,
    pub samples: Vec<ThetaSampleSet>,
    pub prior_samples: ThetaSampleSet,
}

impl Valuation {
    pub fn values(&self) -> CoalitionValues {
        let n = self.estimates.len().trailing_zeros() as usize;
        CoalitionValues::new(n, self.estimates.iter().map(|e| e.value.mean).collect())
            .expect("complete by construction")
    }

    pub fn grand_samples(&self) -> &ThetaSampleSet {
        self.samples.last().expect("at least the empty coalition")
    }
}

/// Run the noise-aware sampler for every non-empty coalition and value it
/// by its fold-averaged surprise against one shared prior sample set. All
/// coalitions use the same sampler seed.
pub fn value_all_coalitions(
    prior: &NigBelief,
    data_prior: &NiwBelief,
    submissions: &[PartySubmission],
    gibbs: &GibbsConfig,
    prior_samples: ThetaSampleSet,
    kl: KlOptions,
) -> Result<Valuation> {
    let n = submissions.len();
    if n == 0 || n > MAX_PARTIES {
        return Err(Error::Argument(format!(
            "{n} parties outside 1..={MAX_PARTIES}"
        )));
    }
    gibbs.validate()?;
    let masks = 1usize << n;
    let runs = par::map(masks - 1, |j| {
        let mask = (j + 1) as u32;
        let subset: Vec<PartySubmission> = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| submissions[i].clone())
            .collect();
        let go = || -> Result<(ThetaSampleSet, Surprise)> {
            let samples = gibbs_noise_aware(prior, data_prior, &subset, gibbs)?;
            let value = surprise_k(&samples, &prior_samples, kl.repeats, kl.k)?;
            Ok((samples, value))
        };
        go().map_err(|e| Error::Coalition {
            mask,
            source: Box::new(e),
        })
    });
    let empty = Surprise {
        mean: 0.0,
        std_err: 0.0,
        single_fold: false,
        clamped_folds: 0,
        raw: vec![0.0; kl.repeats],
    };
    let mut estimates = vec![CoalitionEstimate {
        mask: 0,
        value: empty,
    }];
    let mut samples = vec![prior_samples.clone()];
    for (j, run) in runs.into_iter().enumerate() {
        let (s, v) = run?;
        estimates.push(CoalitionEstimate {
            mask: (j + 1) as u32,
            value: v,
        });
        samples.push(s);
    }
    Ok(Valuation {
        estimates,
        samples,
        prior_samples,
    })
}

/// Exact Shapley values
/// `φ_i = (1/n) Σ_{C ⊆ N∖i} C(n−1, |C|)⁻¹ (v_{C∪i} − v_C)`.
pub fn shapley(values: &CoalitionValues) -> Vec<f64> {
    let n = values.parties();
    // weight(s) = s!(n−s−1)!/n! = 1/(n·C(n−1, s))
    let mut weight = vec![0.0; n];
    let mut binom = 1.0;
    for (s, w) in weight.iter_mut().enumerate() {
        *w = 1.0 / (n as f64 * binom);
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for mask in 0..1u32 << n {
            if mask & bit == 0 {
                *p += weight[mask.count_ones() as usize]
                    * (values.get(mask | bit) - values.get(mask));
            }
        }
    }
    phi
}

/// Largest ρ for which every ρ-Shapley target is individually rational.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoBound {
    pub bound: f64,
    /// A value or Shapley value was non-positive, or the bound is 0.
    pub flagged: bool,
}

/// `min_i ln(v_i/v_N)/ln(φ_i/max φ)` over parties below the maximum Shapley
/// value; 1 when all Shapley values are equal. Non-positive `v_i` (always
/// rational) are skipped and negative `φ_i` are floored as in
/// [`rho_shapley_targets`]; both set the flag, as does a bound of 0. A zero
/// `φ_i` with positive `v_i` forces the bound to 0.
pub fn rho_upper_bound(values: &CoalitionValues, phi: &[f64]) -> RhoBound {
    let vn = values.grand();
    let max = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut flagged = !(vn > 0.0) || !(max > 0.0);
    if flagged {
        return RhoBound {
            bound: 0.0,
            flagged,
        };
    }
    let mut bound: f64 = 1.0;
    for (i, &p) in phi.iter().enumerate() {
        if p >= max {
            continue;
        }
        let vi = values.solo(i);
        if p <= 0.0 || vi <= 0.0 {
            flagged = true;
        }
        if vi <= 0.0 {
            continue;
        }
        if p == 0.0 {
            bound = 0.0;
            continue;
        }
        let p = p.max(SHAPLEY_FLOOR * max);
        bound = bound.min(libm::log(vi / vn) / libm::log(p / max));
    }
    if bound <= 0.0 {
        flagged = true;
        bound = 0.0;
    }
    RhoBound { bound, flagged }
}

/// Relative floor applied to negative Shapley values.
pub const SHAPLEY_FLOOR: f64 = 1e-6;

/// `r*_i = v_N (φ_i / max φ)^ρ`. Negative `φ_i` are floored at
/// `1e-6·max φ` with a warning; a null player (`φ_i = 0`) receives 0 and the
/// argmax party exactly `v_N`.
pub fn rho_shapley_targets(values: &CoalitionValues, phi: &[f64], rho: f64) -> Result<Vec<f64>> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Argument(format!("rho {rho} outside (0, 1]")));
    }
    if phi.len() != values.parties() {
        return Err(Error::arg("one Shapley value per party is required"));
    }
    let max = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::arg("no positive Shapley value to split the reward"));
    }
    let vn = values.grand();
    Ok(phi
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if p < 0.0 {
                log::warn!("party {i} has negative Shapley value {p}; flooring it, fairness is not guaranteed");
            }
            let p = if p < 0.0 { SHAPLEY_FLOOR * max } else { p };
            if p == max { vn } else { vn * libm::pow(p / max, rho) }
        })
        .collect())
}

/// `v′_C = KL(p(θ|o_N) ‖ p(θ)) − KL(p(θ|o_N) ‖ p(θ|o_C))`, unclamped and
/// averaged over `kl.repeats ≥ 2` interleaved folds. Fold `r` of the grand set
/// is compared with fold `r` of the prior set and fold `r + 1` of the
/// coalition set, so the two sets of a pair never share a sample even when
/// the coalition set is the grand set.
pub fn alt_valuation(
    grand: &ThetaSampleSet,
    coalition: &ThetaSampleSet,
    prior: &ThetaSampleSet,
    kl: KlOptions,
) -> Result<FoldEstimate> {
    let to_coalition = cross_fold_raw(grand, coalition, kl)?;
    let repeats = kl.repeats;
    let raw = par::map(repeats, |r| -> Result<f64> {
        knn_kl_raw(&grand.fold(r, repeats)?, &prior.fold(r, repeats)?, kl.k)
    })
    .into_iter()
    .zip(to_coalition)
    .map(|(a, b)| Ok(a? - b))
    .collect::<Result<Vec<_>>>()?;
    let (mean, std_err) = mean_and_se(&raw);
    Ok(FoldEstimate { mean, std_err, raw })
}

/// Per-run ledger of the incentive pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationLedger {
    pub coalition_values: Vec<(f64, f64)>,
    pub shapley: Vec<f64>,
    pub targets: Vec<f64>,
    pub rho: f64,
    pub rho_bound: RhoBound,
    pub attained: Vec<Option<f64>>,
    pub similarity: Vec<Option<f64>>,
}
