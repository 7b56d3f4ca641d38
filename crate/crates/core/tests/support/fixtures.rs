//! Shared Syn desk scenarios built from the crate's own generators.
#![allow(dead_code)]

use dpcollab_core::model::{generate_synthetic, SynConfig};
use dpcollab_core::privacy::{NoiseSpec, PartySubmission};
use dpcollab_core::suffstat::{compute_ss, sensitivity_bound};
use dpcollab_core::{Dataset, SufficientStatistic};

pub const LAMBDA: f64 = 2.0;

pub fn sensitivity(cfg: &SynConfig) -> f64 {
    sensitivity_bound(cfg.dim(), cfg.input_bound(), cfg.output_bound()).unwrap()
}

/// Perturbed submissions at per-party budgets `eps`, with the exact total.
pub fn submit(
    cfg: &SynConfig,
    parts: &[Dataset],
    eps: &[f64],
    noise_seed: u64,
) -> (Vec<PartySubmission>, SufficientStatistic) {
    let sens = sensitivity(cfg);
    let mut total = SufficientStatistic::zeros(cfg.dim());
    let subs = parts
        .iter()
        .zip(eps)
        .enumerate()
        .map(|(k, (p, &e))| {
            total = &total + &compute_ss(p);
            PartySubmission::from_dataset(
                p,
                NoiseSpec::gaussian(LAMBDA, e, sens).unwrap(),
                noise_seed.wrapping_mul(31).wrapping_add(k as u64),
            )
        })
        .collect();
    (subs, total)
}

pub fn desk_parts(seed: u64) -> (SynConfig, Vec<Dataset>) {
    let cfg = SynConfig::desk();
    let data = generate_synthetic(&cfg, seed).unwrap();
    (cfg, data.partitions)
}

/// Rows whose first input does not exceed `threshold`.
pub fn keep_below(data: &Dataset, threshold: f64) -> Dataset {
    let d = data.dim();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (x, y) in data.rows() {
        if x[0] <= threshold {
            inputs.extend_from_slice(x);
            outputs.push(y);
        }
    }
    Dataset::new(d, inputs, outputs, data.input_bound(), data.output_bound()).unwrap()
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
