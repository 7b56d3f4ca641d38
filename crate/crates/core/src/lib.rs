//! Incentive-aware, differentially private collaborative learning for
//! Bayesian linear regression.
//!
//! Parties share Gaussian-mechanism perturbed sufficient statistics instead of
//! data. A mediator runs a noise-aware Gibbs sampler to obtain posterior
//! samples for every coalition, values each coalition by the KL divergence
//! from the prior (Bayesian surprise), turns the values into ρ-Shapley reward
//! targets, and finally controls each party's model reward through likelihood
//! tempering (κ) or additional noise (τ) until the target is attained.
//!
//! The crate is `no_std` compatible (it needs `alloc`). The `std` feature
//! enables the standard library backends of the math crates, and `parallel`
//! runs chains, folds and coalitions on a rayon pool. Every stochastic
//! routine takes an explicit seed; results do not depend on the thread count.
// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod divergence;
mod error;
pub mod inference;
mod linalg;
pub mod metrics;
pub mod model;
mod par;
pub mod privacy;
pub mod reward;
pub mod rng;
pub mod special;
pub mod suffstat;
pub mod valuation;

pub use error::{Error, Result};
pub use model::{
    unvech, vech, vech_len, Dataset, NigBelief, NiwBelief, Provenance, SampleSource,
    SufficientStatistic, ThetaSample, ThetaSampleSet,
};
pub use privacy::{NoiseSpec, PartySubmission};
