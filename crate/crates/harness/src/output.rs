//! CSV schemas of the run outputs. Parties are 1-based; `seed` is
//! `master:noise_index`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::pipeline::JobOutput;

pub const COALITIONS: &str = "coalitions.csv";
pub const SHAPLEY: &str = "shapley.csv";
pub const REWARDS: &str = "rewards.csv";
pub const MNLP: &str = "mnlp.csv";
pub const ALT_VALUATION: &str = "alt_valuation.csv";
pub const TRACE_DIR: &str = "tau_traces";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionRow {
    pub run_id: usize,
    pub seed: String,
    pub epsilon_sweep: f64,
    pub coalition_mask: u32,
    pub v_mean: f64,
    pub v_stderr: f64,
    pub clamped_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyRow {
    pub run_id: usize,
    pub seed: String,
    pub epsilon_sweep: f64,
    pub party: usize,
    pub phi: f64,
    pub target_r: f64,
    pub rho: f64,
    pub rho_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub run_id: usize,
    pub seed: String,
    pub epsilon_sweep: f64,
    pub party: usize,
    pub mechanism: String,
    pub control_value: f64,
    pub attained_r: f64,
    pub similarity_rprime: f64,
    pub iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnlpRow {
    pub run_id: usize,
    pub seed: String,
    pub epsilon_sweep: f64,
    pub party: usize,
    pub model: String,
    pub mnlp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltRow {
    pub run_id: usize,
    pub seed: String,
    pub epsilon_sweep: f64,
    pub coalition_mask: u32,
    pub v_alt_mean: f64,
    pub v_alt_stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tables {
    pub coalitions: Vec<CoalitionRow>,
    pub shapley: Vec<ShapleyRow>,
    pub rewards: Vec<RewardRow>,
    pub mnlp: Vec<MnlpRow>,
    pub alt: Vec<AltRow>,
}

impl Tables {
    pub fn from_outputs(outputs: &[JobOutput]) -> Self {
        let mut t = Tables::default();
        for o in outputs {
            t.push(o);
        }
        t
    }

    fn push(&mut self, o: &JobOutput) {
        let (run_id, eps) = (o.job.run_id, o.job.epsilon);
        for c in o.coalitions.iter().filter(|c| c.mask != 0) {
            self.coalitions.push(CoalitionRow {
                run_id,
                seed: o.seed.clone(),
                epsilon_sweep: eps,
                coalition_mask: c.mask,
                v_mean: c.value.mean,
                v_stderr: c.value.std_err,
                clamped_folds: c.value.clamped_folds,
            });
        }
        for (i, &phi) in o.shapley.iter().enumerate() {
            self.shapley.push(ShapleyRow {
                run_id,
                seed: o.seed.clone(),
                epsilon_sweep: eps,
                party: i + 1,
                phi,
                target_r: o.targets.as_ref().map_or(f64::NAN, |t| t[i]),
                rho: o.rho,
                rho_bound: o.rho_bound.bound,
            });
        }
        for r in &o.rewards {
            let sol = r.solution.as_ref();
            self.rewards.push(RewardRow {
                run_id,
                seed: o.seed.clone(),
                epsilon_sweep: eps,
                party: r.party + 1,
                mechanism: r.mechanism.name().to_string(),
                control_value: sol.map_or(f64::NAN, |s| s.control),
                attained_r: sol.map_or(f64::NAN, |s| s.attained.mean),
                similarity_rprime: r.similarity.as_ref().map_or(f64::NAN, |s| s.mean),
                iters: sol
                    .map_or_else(|| r.no_root_trace.as_ref().map_or(0, Vec::len), |s| s.iters),
            });
        }
        for m in &o.mnlp {
            self.mnlp.push(MnlpRow {
                run_id,
                seed: o.seed.clone(),
                epsilon_sweep: eps,
                party: m.party,
                model: m.model.to_string(),
                mnlp: m.value,
            });
        }
        if let Some(alt) = &o.alt {
            for (mask, est) in alt.iter().enumerate().skip(1) {
                self.alt.push(AltRow {
                    run_id,
                    seed: o.seed.clone(),
                    epsilon_sweep: eps,
                    coalition_mask: mask as u32,
                    v_alt_mean: est.mean,
                    v_alt_stderr: est.std_err,
                });
            }
        }
    }

    /// Write the non-empty tables; coalition and Shapley tables always.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_rows(&dir.join(COALITIONS), &self.coalitions)?;
        write_rows(&dir.join(SHAPLEY), &self.shapley)?;
        if !self.rewards.is_empty() {
            write_rows(&dir.join(REWARDS), &self.rewards)?;
        }
        if !self.mnlp.is_empty() {
            write_rows(&dir.join(MNLP), &self.mnlp)?;
        }
        if !self.alt.is_empty() {
            write_rows(&dir.join(ALT_VALUATION), &self.alt)?;
        }
        Ok(())
    }
}

/// Write `(τ, r)` traces of failed τ searches; returns how many.
pub fn write_traces(dir: &Path, outputs: &[JobOutput]) -> Result<usize> {
    let mut written = 0;
    for o in outputs {
        for r in &o.rewards {
            let Some(trace) = &r.no_root_trace else {
                continue;
            };
            let trace_dir = dir.join(TRACE_DIR);
            fs::create_dir_all(&trace_dir)?;
            let path = trace_dir.join(format!("run{}_party{}.csv", o.job.run_id, r.party + 1));
            let mut w = csv::Writer::from_path(&path)
                .with_context(|| format!("writing {}", path.display()))?;
            w.write_record(["tau", "r", "target"])?;
            for (tau, v) in trace {
                w.serialize((tau, v, r.target))?;
            }
            w.flush()?;
            written += 1;
        }
    }
    Ok(written)
}

/// Column names of a row type, for tables written without rows.
pub trait Header {
    const HEADER: &'static [&'static str];
}

impl Header for CoalitionRow {
    const HEADER: &'static [&'static str] = &[
        "run_id",
        "seed",
        "epsilon_sweep",
        "coalition_mask",
        "v_mean",
        "v_stderr",
        "clamped_folds",
    ];
}

impl Header for ShapleyRow {
    const HEADER: &'static [&'static str] = &[
        "run_id",
        "seed",
        "epsilon_sweep",
        "party",
        "phi",
        "target_r",
        "rho",
        "rho_bound",
    ];
}

impl Header for RewardRow {
    const HEADER: &'static [&'static str] = &[
        "run_id",
        "seed",
        "epsilon_sweep",
        "party",
        "mechanism",
        "control_value",
        "attained_r",
        "similarity_rprime",
        "iters",
    ];
}

impl Header for MnlpRow {
    const HEADER: &'static [&'static str] =
        &["run_id", "seed", "epsilon_sweep", "party", "model", "mnlp"];
}

impl Header for AltRow {
    const HEADER: &'static [&'static str] = &[
        "run_id",
        "seed",
        "epsilon_sweep",
        "coalition_mask",
        "v_alt_mean",
        "v_alt_stderr",
    ];
}

/// Write rows with a header even when `rows` is empty.
pub fn write_rows<T: Serialize + Header>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(!rows.is_empty())
        .from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    if rows.is_empty() {
        w.write_record(T::HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .map(|row| row.with_context(|| format!("parsing {}", path.display())))
        .collect()
}
