//! Aggregate run tables into per-ε means and standard errors.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::output::{self, CoalitionRow, Header, MnlpRow, RewardRow, ShapleyRow};

pub const SUMMARY: &str = "summary.csv";
/// Allowed `|Σφ − v_N|` per run.
pub const EFFICIENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub epsilon_sweep: f64,
    pub quantity: String,
    /// Coalition mask for `v`; 1-based party otherwise, with the mechanism
    /// or model appended after a colon where one applies.
    pub key: String,
    pub mean: f64,
    pub stderr: f64,
    /// Non-NaN observations.
    pub n: usize,
}

impl Header for SummaryRow {
    const HEADER: &'static [&'static str] =
        &["epsilon_sweep", "quantity", "key", "mean", "stderr", "n"];
}

/// Check `Σφ = v_N` per run.
pub fn check_efficiency(coalitions: &[CoalitionRow], shapley: &[ShapleyRow]) -> Result<()> {
    let mut grand: BTreeMap<usize, (u32, f64)> = BTreeMap::new();
    for c in coalitions {
        let e = grand.entry(c.run_id).or_insert((0, 0.0));
        if c.coalition_mask > e.0 {
            *e = (c.coalition_mask, c.v_mean);
        }
    }
    let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
    for s in shapley {
        *sums.entry(s.run_id).or_insert(0.0) += s.phi;
    }
    for (run, sum) in sums {
        let Some(&(_, vn)) = grand.get(&run) else {
            bail!("run {run} has Shapley values but no coalition values")
        };
        if (sum - vn).abs() > EFFICIENCY_TOL {
            bail!("run {run}: Shapley values sum to {sum}, grand coalition value is {vn}");
        }
    }
    Ok(())
}

/// Mean and standard error of the non-NaN entries.
pub fn mean_se(xs: &[f64]) -> (f64, f64, usize) {
    let v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN, 1);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt(), n)
}

#[derive(Default)]
struct Groups(BTreeMap<(u64, String, String), Vec<f64>>);

impl Groups {
    /// ε values are positive, so their bit patterns sort like the values.
    fn add(&mut self, eps: f64, quantity: &str, key: String, x: f64) {
        self.0
            .entry((eps.to_bits(), quantity.to_string(), key))
            .or_default()
            .push(x);
    }

    fn rows(self) -> Vec<SummaryRow> {
        self.0
            .into_iter()
            .map(|((bits, quantity, key), xs)| {
                let (mean, stderr, n) = mean_se(&xs);
                SummaryRow {
                    epsilon_sweep: f64::from_bits(bits),
                    quantity,
                    key,
                    mean,
                    stderr,
                    n,
                }
            })
            .collect()
    }
}

pub fn summarize(
    coalitions: &[CoalitionRow],
    shapley: &[ShapleyRow],
    rewards: &[RewardRow],
    mnlp: &[MnlpRow],
) -> Vec<SummaryRow> {
    let mut g = Groups::default();
    for c in coalitions {
        g.add(c.epsilon_sweep, "v", c.coalition_mask.to_string(), c.v_mean);
    }
    for s in shapley {
        g.add(s.epsilon_sweep, "phi", s.party.to_string(), s.phi);
        g.add(s.epsilon_sweep, "target_r", s.party.to_string(), s.target_r);
    }
    for r in rewards {
        let key = format!("{}:{}", r.party, r.mechanism);
        g.add(
            r.epsilon_sweep,
            "control_value",
            key.clone(),
            r.control_value,
        );
        g.add(r.epsilon_sweep, "attained_r", key.clone(), r.attained_r);
        g.add(
            r.epsilon_sweep,
            "similarity_rprime",
            key,
            r.similarity_rprime,
        );
    }
    for m in mnlp {
        g.add(
            m.epsilon_sweep,
            "mnlp",
            format!("{}:{}", m.party, m.model),
            m.mnlp,
        );
    }
    g.rows()
}

/// Read the tables in `dir`, check efficiency and write `summary.csv`.
pub fn report(dir: &Path) -> Result<Vec<SummaryRow>> {
    let coalitions: Vec<CoalitionRow> = output::read_rows(&dir.join(output::COALITIONS))?;
    let shapley: Vec<ShapleyRow> = output::read_rows(&dir.join(output::SHAPLEY))?;
    let optional = |name: &str| dir.join(name).exists();
    let rewards: Vec<RewardRow> = if optional(output::REWARDS) {
        output::read_rows(&dir.join(output::REWARDS))?
    } else {
        Vec::new()
    };
    let mnlp: Vec<MnlpRow> = if optional(output::MNLP) {
        output::read_rows(&dir.join(output::MNLP))?
    } else {
        Vec::new()
    };
    check_efficiency(&coalitions, &shapley)?;
    let rows = summarize(&coalitions, &shapley, &rewards, &mnlp);
    output::write_rows(&dir.join(SUMMARY), &rows)?;
    Ok(rows)
}
