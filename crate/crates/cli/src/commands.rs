use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use gossip_dual::config::{ConfigDocument, SWEEPABLE};
use gossip_dual::prelude::*;
use gossip_dual::{artifacts, ConfigError};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::seed::derive_seed;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Run(#[from] gossip_dual::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Run(gossip_dual::Error::Contract(_))
            | CliError::Run(gossip_dual::Error::Codec(_)) => 3,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load(path: &Path) -> Result<ConfigDocument, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    ConfigDocument::parse(&text).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

fn to_run_config(doc: &ConfigDocument, path: &Path) -> Result<RunConfig, CliError> {
    doc.to_run_config().map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

pub fn check(path: &Path) -> Result<(), CliError> {
    let doc = load(path)?;
    let config = to_run_config(&doc, path)?;
    let c = check_conditions(&config).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })?;
    println!("agents      {}", c.n_agents);
    println!("zones       {}", c.n_zones);
    println!("diameter    {}", c.diameter);
    println!("d           {}", config.retention);
    println!("delta_c     {}", c.delta_c);
    println!("lhs         {}", c.lhs);
    println!("satisfied   {}", c.satisfied);
    println!("spec_ok     {}", c.spec_ok);
    if !c.spec_ok {
        warn!(
            "thresholds sum to {} with {} agents; the problem may be infeasible",
            c.threshold_sum, c.n_agents
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct MismatchSummary {
    max_excess: f64,
    min_excess: f64,
    bound: f64,
}

#[derive(Serialize)]
struct Violations {
    deadline: u64,
    consensus: u64,
    gradient_norm_exceedances: u64,
    max_gradient_norm_sq: f64,
}

#[derive(Serialize)]
struct DiagnosticsFile<'a> {
    seed: u64,
    horizon: u64,
    conditions: &'a TheoremConditions,
    feasibility: &'a FeasibilityReport,
    drift: &'a DriftReport,
    terminal_averages: Vec<f64>,
    coverage_window: u64,
    longest_gap: &'a [u64],
    lambda_norm_sq: &'a [f64],
    mismatch: MismatchSummary,
    violations: Violations,
}

/// Everything a sweep row needs from one run.
struct Outcome {
    seed: u64,
    feasibility: FeasibilityReport,
    mismatch_max: f64,
    mismatch_bound: f64,
    deadline_violations: u64,
    satisfied: bool,
}

fn mismatch_bound(config: &RunConfig) -> f64 {
    config.eta * config.topology.diameter() as f64 / config.t_zero as f64
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(io_err(&path))
}

fn write_diagnostics(
    dir: &Path,
    config: &RunConfig,
    run: &RunArtifacts,
    feasibility: &FeasibilityReport,
) -> Result<(), CliError> {
    let diag = &run.diagnostics;
    let drift = drift_report(diag);
    let file = DiagnosticsFile {
        seed: config.seed,
        horizon: diag.horizon,
        conditions: &run.conditions,
        feasibility,
        drift: &drift,
        terminal_averages: diag.terminal_averages(),
        coverage_window: diag.coverage_window(),
        longest_gap: &diag.longest_gap,
        lambda_norm_sq: &diag.lambda_sq,
        mismatch: MismatchSummary {
            max_excess: diag.max_mismatch(),
            min_excess: diag.min_mismatch(),
            bound: mismatch_bound(config),
        },
        violations: Violations {
            deadline: diag.deadline_violations,
            consensus: diag.consensus_violations,
            gradient_norm_exceedances: diag.gradient_norm_exceedances,
            max_gradient_norm_sq: diag.max_gradient_norm_sq,
        },
    };
    let path = dir.join("diagnostics.json");
    let mut text = serde_json::to_string_pretty(&file).expect("diagnostics serialize");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))
}

fn write_config(dir: &Path, doc: &ConfigDocument) -> Result<(), CliError> {
    let path = dir.join("config.toml");
    fs::write(&path, doc.to_toml()).map_err(io_err(&path))
}

fn warn_on(run: &RunArtifacts) {
    if !run.conditions.satisfied {
        warn!(
            "sufficient condition not met: lhs {} >= delta_c {}",
            run.conditions.lhs, run.conditions.delta_c
        );
    }
    let diag = &run.diagnostics;
    if diag.deadline_violations > 0 {
        warn!(
            "{} gossip estimates missed their deadline",
            diag.deadline_violations
        );
    }
    if diag.gradient_norm_exceedances > 0 {
        info!(
            "{} rollouts with squared gradient norm above 1 (max {})",
            diag.gradient_norm_exceedances, diag.max_gradient_norm_sq
        );
    }
}

fn output_dir(doc: &ConfigDocument, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = out
        .or_else(|| doc.run.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

pub fn run(
    path: &Path,
    out: Option<PathBuf>,
    trace_messages: bool,
    tolerance: f64,
) -> Result<(), CliError> {
    let doc = load(path)?;
    let config = to_run_config(&doc, path)?;
    let dir = output_dir(&doc, out)?;
    info!(
        "running {} rollouts of {} ticks",
        config.rollouts, config.t_zero
    );

    let options = RunOptions {
        record_trajectory: true,
        trace_messages,
    };
    let result = gossip_dual::executor::run(&config, options)?;
    warn_on(&result);
    let feasibility = feasibility_report(&result.diagnostics, tolerance);

    artifacts::write_trajectory(create(&dir, "trajectory.csv")?, &result)?;
    artifacts::write_multipliers(create(&dir, "multipliers.csv")?, &result)?;
    artifacts::write_running_averages(
        create(&dir, "running_averages.csv")?,
        &result,
        config.t_zero,
    )?;
    artifacts::write_lambda(create(&dir, "lambda.csv")?, &result)?;
    artifacts::write_mismatch(
        create(&dir, "mismatch.csv")?,
        &result,
        mismatch_bound(&config),
    )?;
    if trace_messages {
        artifacts::write_message_trace(create(&dir, "messages.log")?, &result)?;
    }
    write_diagnostics(&dir, &config, &result, &feasibility)?;
    write_config(&dir, &doc.effective(&config))?;

    for z in &feasibility.zones {
        println!(
            "zone {:>3}  c {:<6} average {:.4}  {}",
            z.zone_id,
            z.threshold,
            z.average,
            if z.pass { "ok" } else { "SHORT" }
        );
    }
    println!(
        "mismatch max {:.3e} (bound {:.3e}), deadline violations {}",
        result.diagnostics.max_mismatch(),
        mismatch_bound(&config),
        result.diagnostics.deadline_violations
    );
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn run_one(
    doc: &ConfigDocument,
    path: &Path,
    dir: &Path,
    tolerance: f64,
) -> Result<Outcome, CliError> {
    let config = to_run_config(doc, path)?;
    let result = gossip_dual::executor::run(&config, RunOptions::default())?;
    warn_on(&result);
    let feasibility = feasibility_report(&result.diagnostics, tolerance);
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_config(dir, &doc.effective(&config))?;
    write_diagnostics(dir, &config, &result, &feasibility)?;
    Ok(Outcome {
        seed: config.seed,
        mismatch_max: result.diagnostics.max_mismatch(),
        mismatch_bound: mismatch_bound(&config),
        deadline_violations: result.diagnostics.deadline_violations,
        satisfied: result.conditions.satisfied,
        feasibility,
    })
}

pub fn sweep(
    path: &Path,
    key: &str,
    values: &[String],
    out: Option<PathBuf>,
    tolerance: f64,
) -> Result<(), CliError> {
    if !SWEEPABLE.contains(&key) {
        return Err(CliError::Usage(format!(
            "'{key}' is not sweepable; expected one of {}",
            SWEEPABLE.join(", ")
        )));
    }
    let parsed = values
        .iter()
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Usage(format!("sweep value '{v}' is not a number")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if parsed.is_empty() {
        return Err(CliError::Usage("no sweep values given".into()));
    }

    let base = load(path)?;
    let dir = output_dir(&base, out)?;
    let docs = parsed
        .iter()
        .map(|&value| {
            let mut doc = base.clone();
            doc.set_param(key, value)
                .map_err(|source| CliError::Config {
                    path: path.to_path_buf(),
                    source,
                })?;
            doc.run.seed = derive_seed(base.run.seed, key, value);
            Ok(doc)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let outcomes = docs
        .par_iter()
        .zip(values.par_iter())
        .map(|(doc, raw)| {
            run_one(
                doc,
                path,
                &dir.join(format!("{key}={}", raw.trim())),
                tolerance,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let csv_path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&dir, "sweep.csv")?);
    let write = |w: &mut csv::Writer<_>, rec: Vec<String>| {
        w.write_record(rec).map_err(|e| CliError::Run(e.into()))
    };
    write(
        &mut w,
        [
            "param",
            "value",
            "seed",
            "worst_gap",
            "all_pass",
            "mismatch_max",
            "mismatch_bound",
            "deadline_violations",
            "theorem_satisfied",
        ]
        .map(String::from)
        .to_vec(),
    )?;
    for (value, o) in parsed.iter().zip(&outcomes) {
        println!(
            "{key}={value}: worst gap {:.4}, all pass {}, deadline violations {}",
            o.feasibility.worst_gap(),
            o.feasibility.all_pass(),
            o.deadline_violations
        );
        write(
            &mut w,
            vec![
                key.to_string(),
                value.to_string(),
                o.seed.to_string(),
                o.feasibility.worst_gap().to_string(),
                o.feasibility.all_pass().to_string(),
                o.mismatch_max.to_string(),
                o.mismatch_bound.to_string(),
                o.deadline_violations.to_string(),
                o.satisfied.to_string(),
            ],
        )?;
    }
    w.flush().map_err(io_err(&csv_path))?;
    println!("sweep results in {}", csv_path.display());
    Ok(())
}
