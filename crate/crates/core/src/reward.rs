//! Reward control: find the tempering factor κ or extra-noise factor τ
//! whose posterior attains a party's target value.
//!
//! Every function here sees only what the mediator holds: submissions,
//! beliefs and sample sets. None accepts a [`crate::Dataset`].

use alloc::format;
use alloc::vec::Vec;

use crate::divergence::{
    cross_fold_raw, mean_and_se, surprise_k, FoldEstimate, KlOptions, Surprise,
};
use crate::inference::{gibbs_noise_aware, scaled_inputs, FurtherNoise, GibbsConfig};
use crate::model::{NigBelief, NiwBelief, ThetaSampleSet};
use crate::privacy::PartySubmission;
use crate::{Error, Result};

/// Fixed inputs of the reward solves for one run.
#[derive(Debug, Clone, Copy)]
pub struct RewardContext<'a> {
    pub prior: &'a NigBelief,
    pub data_prior: &'a NiwBelief,
    /// All parties' submissions; every reward is built from the grand
    /// coalition's information.
    pub submissions: &'a [PartySubmission],
    pub gibbs: GibbsConfig,
    pub prior_samples: &'a ThetaSampleSet,
    pub grand_samples: &'a ThetaSampleSet,
    /// `v_N`.
    pub grand_value: f64,
    pub lambda: f64,
    /// Neighbour order of every KL estimate.
    pub k: usize,
    /// Folds per evaluation inside a solve.
    pub inner_repeats: usize,
    /// Folds for the reported attained value.
    pub final_repeats: usize,
}

/// Solver tolerances. `tol` is absolute; a step also stops once within
/// two standard errors of the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub tau_max: f64,
    /// Grid points for the τ search, including τ = 0.
    pub tau_grid: usize,
}

impl SolveOptions {
    /// `tol = 0.05·v_N`, 12 bisection steps, `τ ∈ [0, 100]` on 16 points.
    pub fn for_grand_value(v_grand: f64) -> Self {
        SolveOptions {
            tol: 0.05 * v_grand.max(0.0),
            max_iters: 12,
            tau_max: 100.0,
            tau_grid: 16,
        }
    }
}

/// A solved reward.
#[derive(Debug, Clone)]
pub struct RewardSolution {
    /// κ or τ.
    pub control: f64,
    pub samples: ThetaSampleSet,
    /// Attained value with the final fold count.
    pub attained: Surprise,
    /// Sampler evaluations performed.
    pub iters: usize,
    /// The target was unreachable and the solution pinned to a bound.
    pub clamped: bool,
    /// `(control, r)` of every evaluation in order.
    pub trace: Vec<(f64, f64)>,
}

/// `r = KL(q ‖ p(θ))`, fold-averaged.
pub fn attained_value(
    q: &ThetaSampleSet,
    prior_samples: &ThetaSampleSet,
    kl: KlOptions,
) -> Result<Surprise> {
    surprise_k(q, prior_samples, kl.repeats, kl.k)
}

/// `r′ = −KL(p(θ|o_N) ‖ q)` over `kl.repeats ≥ 2` disjoint fold pairs; each
/// inner estimate is clamped at 0.
pub fn similarity(
    grand: &ThetaSampleSet,
    q: &ThetaSampleSet,
    kl: KlOptions,
) -> Result<FoldEstimate> {
    let raw: Vec<f64> = cross_fold_raw(grand, q, kl)?
        .into_iter()
        .map(|v| -v.max(0.0))
        .collect();
    let (mean, std_err) = mean_and_se(&raw);
    Ok(FoldEstimate { mean, std_err, raw })
}

impl RewardContext<'_> {
    fn evaluate(&self, subs: &[PartySubmission], seed: u64) -> Result<Probe<ThetaSampleSet>> {
        let samples = gibbs_noise_aware(
            self.prior,
            self.data_prior,
            subs,
            &self.gibbs.with_seed(seed),
        )?;
        let s = surprise_k(&samples, self.prior_samples, self.inner_repeats, self.k)?;
        Ok(Probe {
            value: s.mean,
            std_err: s.std_err,
            payload: samples,
        })
    }

    fn finish(
        &self,
        control: f64,
        samples: ThetaSampleSet,
        iters: usize,
        clamped: bool,
        trace: Vec<(f64, f64)>,
    ) -> Result<RewardSolution> {
        let attained = attained_value(
            &samples,
            self.prior_samples,
            KlOptions {
                k: self.k,
                repeats: self.final_repeats,
            },
        )?;
        Ok(RewardSolution {
            control,
            samples,
            attained,
            iters,
            clamped,
            trace,
        })
    }
}

fn check_target(target: f64, opts: &SolveOptions) -> Result<()> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::Argument(format!(
            "target {target} must be finite and non-negative"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::arg("tolerance must be positive"));
    }
    Ok(())
}

/// One evaluation of a noisy objective: value, standard error and payload.
pub struct Probe<T> {
    pub value: f64,
    pub std_err: f64,
    pub payload: T,
}

/// Result of a root search: the accepted point, its probe and every
/// `(x, value)` evaluated.
pub struct Root<T> {
    pub x: f64,
    pub probe: Probe<T>,
    pub trace: Vec<(f64, f64)>,
}

fn within<T>(p: &Probe<T>, target: f64, tol: f64) -> bool {
    (p.value - target).abs() <= tol.max(2.0 * p.std_err)
}

/// Bisection for `f(x) = target` on `[lo, hi]` with `f` non-decreasing in
/// expectation. Stops once `|f − target| ≤ max(tol, 2·se)`; after
/// `max_iters` steps the closest probe is returned.
pub fn bisect<T, F>(
    mut f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iters: usize,
) -> Result<Root<T>>
where
    F: FnMut(f64) -> Result<Probe<T>>,
{
    let mut trace = Vec::new();
    let mut best: Option<(f64, Probe<T>)> = None;
    for _ in 0..max_iters.max(1) {
        let x = 0.5 * (lo + hi);
        let p = f(x)?;
        trace.push((x, p.value));
        let done = within(&p, target, tol);
        if p.value < target {
            lo = x;
        } else {
            hi = x;
        }
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| (p.value - target).abs() < (b.value - target).abs());
        if better || done {
            best = Some((x, p));
        }
        if done {
            break;
        }
    }
    let (x, probe) = best.expect("at least one iteration");
    Ok(Root { x, probe, trace })
}

/// Smallest root of `f(x) = target` over an ascending grid: the grid is
/// scanned in order and the first sign change of `f − target` is refined by
/// bisection, geometric once both ends are positive. A probe within
/// tolerance ends the search at once. Without a sign change the result is
/// [`Error::NoRoot`] with the trace.
pub fn first_crossing<T, F>(
    mut f: F,
    grid: &[f64],
    target: f64,
    tol: f64,
    max_iters: usize,
) -> Result<Root<T>>
where
    F: FnMut(f64) -> Result<Probe<T>>,
{
    let mut trace = Vec::new();
    let mut prev: Option<(f64, Probe<T>)> = None;
    let mut bracket = None;
    for &x in grid {
        let p = f(x)?;
        trace.push((x, p.value));
        if within(&p, target, tol) {
            return Ok(Root { x, probe: p, trace });
        }
        if let Some((px, pp)) = prev.take() {
            if (pp.value - target).signum() != (p.value - target).signum() {
                bracket = Some((px, pp, x, p));
                break;
            }
        }
        prev = Some((x, p));
    }
    let Some((mut lo, mut lo_p, mut hi, mut hi_p)) = bracket else {
        return Err(Error::NoRoot { target, trace });
    };
    for _ in 0..max_iters {
        let mid = if lo > 0.0 {
            libm::sqrt(lo * hi)
        } else {
            0.5 * (lo + hi)
        };
        let p = f(mid)?;
        trace.push((mid, p.value));
        if within(&p, target, tol) {
            return Ok(Root {
                x: mid,
                probe: p,
                trace,
            });
        }
        if (lo_p.value - target).signum() == (p.value - target).signum() {
            lo = mid;
            lo_p = p;
        } else {
            hi = mid;
            hi_p = p;
        }
    }
    let (x, probe) = if (lo_p.value - target).abs() <= (hi_p.value - target).abs() {
        (lo, lo_p)
    } else {
        (hi, hi_p)
    };
    Ok(Root { x, probe, trace })
}

/// Bisection on κ ∈ [0, 1] for the tempered posterior `p(θ)p(o_N|θ)^κ`.
/// Every evaluation uses the same sampler seed, so the objective is a
/// deterministic function of κ within the solve.
///
/// A target at or above `v_N` returns κ = 1 with the grand-coalition samples;
/// a target of 0 returns κ = 0.
pub fn solve_kappa(
    ctx: &RewardContext<'_>,
    target: f64,
    opts: &SolveOptions,
    seed: u64,
) -> Result<RewardSolution> {
    check_target(target, opts)?;
    if target >= ctx.grand_value {
        let clamped = target > ctx.grand_value + opts.tol;
        if clamped {
            log::warn!(
                "target {target} exceeds the grand value {} beyond tolerance; using kappa = 1",
                ctx.grand_value
            );
        }
        return ctx.finish(1.0, ctx.grand_samples.clone(), 0, clamped, Vec::new());
    }
    if target == 0.0 {
        let e = ctx.evaluate(&scaled_inputs(ctx.submissions, 0.0)?, seed)?;
        return ctx.finish(0.0, e.payload, 1, false, alloc::vec![(0.0, e.value)]);
    }
    let root = bisect(
        |k| ctx.evaluate(&scaled_inputs(ctx.submissions, k)?, seed),
        target,
        0.0,
        1.0,
        opts.tol,
        opts.max_iters,
    )?;
    let iters = root.trace.len();
    ctx.finish(root.x, root.probe.payload, iters, false, root.trace)
}

/// Geometric grid `{0} ∪ {τ_max·10^{-3 + 3j/(n−2)}}`, ascending.
pub fn tau_grid(tau_max: f64, points: usize) -> Vec<f64> {
    let mut grid = Vec::with_capacity(points);
    grid.push(0.0);
    let steps = points.saturating_sub(1);
    for j in 0..steps {
        let frac = if steps > 1 {
            j as f64 / (steps - 1) as f64
        } else {
            1.0
        };
        grid.push(tau_max * libm::pow(10.0, -3.0 + 3.0 * frac));
    }
    grid
}

/// Smallest τ ∈ [0, τ_max] whose further-perturbed posterior attains the
/// target, by [`first_crossing`] over [`tau_grid`]. `r(τ)` need not be
/// monotone. The noise realization `e` is drawn once from `seed`; τ = 0 is
/// the grand coalition's posterior.
pub fn solve_tau(
    ctx: &RewardContext<'_>,
    target: f64,
    opts: &SolveOptions,
    seed: u64,
) -> Result<RewardSolution> {
    check_target(target, opts)?;
    if !(opts.tau_max > 0.0) || opts.tau_grid < 2 {
        return Err(Error::arg(
            "tau search needs a positive upper end and at least two grid points",
        ));
    }
    let noise = FurtherNoise::draw(ctx.submissions, seed);
    let eval_at = |tau: f64| -> Result<Probe<ThetaSampleSet>> {
        if tau == 0.0 {
            let s = surprise_k(
                ctx.grand_samples,
                ctx.prior_samples,
                ctx.inner_repeats,
                ctx.k,
            )?;
            return Ok(Probe {
                value: s.mean,
                std_err: s.std_err,
                payload: ctx.grand_samples.clone(),
            });
        }
        ctx.evaluate(&noise.apply(ctx.submissions, tau, ctx.lambda)?, seed)
    };
    let root = first_crossing(
        eval_at,
        &tau_grid(opts.tau_max, opts.tau_grid),
        target,
        opts.tol,
        opts.max_iters,
    )?;
    let iters = root.trace.len();
    ctx.finish(root.x, root.probe.payload, iters, false, root.trace)
}
