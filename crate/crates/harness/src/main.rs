use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use dpcollab::config::ExperimentConfig;
use dpcollab::output::{self, Tables};
use dpcollab::pipeline::{self, JobOutput, Pipeline, Stage};
use dpcollab::{exit_code, report, EXIT_NO_ROOT};

/// Incentive-aware, differentially private collaborative Bayesian linear
/// regression on synthetic parties.
#[derive(Debug, Parser)]
#[command(name = "dpcollab", version)]
struct Cli {
    /// JSON configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Use the large party sizes.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the party datasets, test set and true parameters.
    Gen {
        /// Print the default configuration and exit.
        #[arg(long)]
        print_defaults: bool,
    },
    /// Value every coalition and compute Shapley values and targets.
    Value,
    /// Value, then solve every party's reward.
    Reward,
    /// Value, reward and score every model on the test set.
    Eval,
    /// Run the full pipeline over the ε grid and all noise seeds.
    Sweep,
    /// Summarize the tables in the output directory.
    Report,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds.master = seed;
    }
    if cli.paper_scale {
        cfg = cfg.paper_scale();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8> {
    if let Command::Gen {
        print_defaults: true,
    } = cli.command
    {
        println!("{}", ExperimentConfig::default().to_json());
        return Ok(0);
    }
    if let Command::Report = cli.command {
        let rows = report::report(&cli.out_dir)?;
        println!(
            "wrote {} summary rows to {}",
            rows.len(),
            cli.out_dir.join(report::SUMMARY).display()
        );
        return Ok(0);
    }
    let cfg = load_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().context("building the worker pool")?;
    fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating {}", cli.out_dir.display()))?;
    fs::write(cli.out_dir.join("config.json"), cfg.to_json())?;
    let pipe = Pipeline::new(cfg)?;
    let (jobs, stage) = match cli.command {
        Command::Gen { .. } => return generate(&pipe, &cli.out_dir).map(|()| 0),
        Command::Value => (vec![pipeline::single_job(&pipe.cfg)], Stage::Value),
        Command::Reward => (vec![pipeline::single_job(&pipe.cfg)], Stage::Reward),
        Command::Eval => (vec![pipeline::single_job(&pipe.cfg)], Stage::Eval),
        Command::Sweep => (pipeline::sweep_jobs(&pipe.cfg), Stage::Eval),
        Command::Report => unreachable!("handled above"),
    };
    let outputs = pool.install(|| pipe.run_all(&jobs, stage))?;
    finish(&cli.out_dir, &outputs)
}

/// Write tables and traces; a failed τ search maps to its exit code after
/// everything else is written.
fn finish(dir: &Path, outputs: &[JobOutput]) -> Result<u8> {
    Tables::from_outputs(outputs).write(dir)?;
    let traces = output::write_traces(dir, outputs)?;
    println!("wrote {} run(s) to {}", outputs.len(), dir.display());
    if traces > 0 {
        eprintln!(
            "error: {traces} tau search(es) found no root; traces in {}",
            dir.join(output::TRACE_DIR).display()
        );
        return Ok(EXIT_NO_ROOT);
    }
    Ok(0)
}

#[derive(Serialize)]
struct Truth {
    w: Vec<f64>,
    sigma2: f64,
    input_means: Vec<Vec<f64>>,
    input_covariances: Vec<Vec<f64>>,
}

fn generate(pipe: &Pipeline, dir: &Path) -> Result<()> {
    let (data, test) = pipe.data(0)?;
    let d = pipe.syn.dim();
    let mut header: Vec<String> = vec!["party".into()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    header.push("y".into());
    let mut w = csv::Writer::from_path(dir.join("parties.csv"))?;
    w.write_record(&header)?;
    for (k, part) in data.partitions.iter().enumerate() {
        for (x, y) in part.rows() {
            let mut rec = vec![(k + 1).to_string()];
            rec.extend(x.iter().map(f64::to_string));
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("test.csv"))?;
    w.write_record(&header[1..])?;
    for (x, y) in test.rows() {
        let mut rec: Vec<String> = x.iter().map(f64::to_string).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    let truth = Truth {
        w: data.true_theta.w().to_vec(),
        sigma2: data.true_theta.sigma2(),
        input_means: data
            .input_params
            .iter()
            .map(|(m, _)| m.as_slice().to_vec())
            .collect(),
        input_covariances: data
            .input_params
            .iter()
            .map(|(_, s)| s.as_slice().to_vec())
            .collect(),
    };
    fs::write(
        dir.join("truth.json"),
        serde_json::to_string_pretty(&truth)?,
    )?;
    println!(
        "wrote {} parties and {} test points to {}",
        data.partitions.len(),
        test.len(),
        dir.display()
    );
    Ok(())
}
