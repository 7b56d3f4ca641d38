//! KL divergence: sample-based kNN estimates and the closed-form NIG case.

mod kdtree;
mod knn;
mod nig;

pub use knn::{knn_kl, knn_kl_points, knn_kl_raw, KnnEstimate, DEFAULT_K, MAX_K};
pub use nig::nig_kl;

use alloc::vec::Vec;

use crate::model::ThetaSampleSet;
use crate::{par, Error, Result};

/// Neighbour order and fold count of a sample-based KL estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KlOptions {
    pub k: usize,
    pub repeats: usize,
}

impl KlOptions {
    /// `repeats` folds with the default neighbour order.
    pub const fn folds(repeats: usize) -> Self {
        KlOptions {
            k: DEFAULT_K,
            repeats,
        }
    }
}

/// Fold-averaged KL estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Surprise {
    pub mean: f64,
    /// Standard error over folds; 0 with `single_fold` set when only one
    /// fold was used.
    pub std_err: f64,
    pub single_fold: bool,
    /// Folds whose raw estimate was negative and clamped to 0.
    pub clamped_folds: usize,
    /// Unclamped per-fold estimates.
    pub raw: Vec<f64>,
}

/// `KL(post ‖ prior)` averaged over `repeats` interleaved folds with the
/// default neighbour order.
pub fn surprise(post: &ThetaSampleSet, prior: &ThetaSampleSet, repeats: usize) -> Result<Surprise> {
    surprise_k(post, prior, repeats, DEFAULT_K)
}

pub fn surprise_k(
    post: &ThetaSampleSet,
    prior: &ThetaSampleSet,
    repeats: usize,
    k: usize,
) -> Result<Surprise> {
    if repeats == 0 {
        return Err(Error::arg("at least one fold is required"));
    }
    let per_fold = post.len().min(prior.len()) / repeats;
    if per_fold < k + 1 {
        return Err(Error::InsufficientSamples {
            needed: (k + 1) * repeats,
            got: post.len().min(prior.len()),
        });
    }
    let raw: Vec<f64> = par::map(repeats, |r| {
        let p = post.fold(r, repeats)?;
        let q = prior.fold(r, repeats)?;
        knn_kl_raw(&p, &q, k)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(summarize(raw))
}

/// Raw `KL(p_r ‖ q_{r+1 mod R})` per fold pair. Shifting the fold of `q`
/// keeps the two sides disjoint when `p` and `q` are the same set.
pub(crate) fn cross_fold_raw(
    p: &ThetaSampleSet,
    q: &ThetaSampleSet,
    kl: KlOptions,
) -> Result<Vec<f64>> {
    let repeats = kl.repeats;
    if repeats < 2 {
        return Err(Error::arg("cross-fold estimates need at least two folds"));
    }
    par::map(repeats, |r| {
        knn_kl_raw(
            &p.fold(r, repeats)?,
            &q.fold((r + 1) % repeats, repeats)?,
            kl.k,
        )
    })
    .into_iter()
    .collect()
}

/// Unclamped fold-averaged estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub raw: Vec<f64>,
}

/// Mean and standard error over folds; the error is 0 for a single fold.
pub(crate) fn mean_and_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let std_err = if n > 1 {
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        libm::sqrt(var / n as f64)
    } else {
        0.0
    };
    (mean, std_err)
}

/// Clamp per-fold values at 0 and report mean and standard error.
pub(crate) fn summarize(raw: Vec<f64>) -> Surprise {
    let n = raw.len();
    let clamped_folds = raw.iter().filter(|v| **v < 0.0).count();
    let vals: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let (mean, std_err) = mean_and_se(&vals);
    Surprise {
        mean,
        std_err,
        single_fold: n == 1,
        clamped_folds,
        raw,
    }
}
