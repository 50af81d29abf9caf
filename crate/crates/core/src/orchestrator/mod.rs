//! Experiment execution: configuration, the round loop with its privacy
//! pipeline, sweeps and reports.
//!
//! A run directory holds `rounds.csv`, `summary.csv`, `manifest.json` and
//! `checkpoints/run{r}_round{t}.ftck`. A sweep directory holds one run
//! directory per axis value plus a combined `sweep.csv`.

mod config;
mod environment;
mod pipeline;
mod report;
mod run;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use config::{
    resolve_seed, AttackConfig, DataConfig, DataSource, ExperimentConfig, ModelKind, PartitionConfig, ReportConfig,
    TrainConfig,
};
pub use environment::{architecture, load_dataset, ClientData, Environment};
pub use pipeline::{secure_sum, AggregationInput, PipelineKeys, PrivacyPipeline, Stage};
pub use report::{config_from_manifest, config_hash, fmt_f64, manifest, read_manifest, read_rounds, ROUNDS_HEADER};
pub use run::{
    checkpoint_path, clean_metrics, client_evals, clients_per_round, run_round, run_single, sample_clients,
    CleanMetrics, RunContext, RunOutput, TOY_MODULUS,
};

use crate::error::{Error, Result};
use crate::metrics::{summarize_runs, MetricSummary, RoundRecord};
use crate::numerics::ModelParams;
use crate::rng::RngStream;

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub runs: Vec<Vec<RoundRecord>>,
    pub run_seeds: Vec<u64>,
    pub diverged: Vec<usize>,
    pub final_models: Vec<Option<ModelParams>>,
    pub summary: Vec<MetricSummary>,
}

impl ExperimentOutcome {
    pub fn all_diverged(&self) -> bool {
        !self.runs.is_empty() && self.diverged.len() == self.runs.len()
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs `cfg.runs` independent seeds (`master_seed + r`) and, with
/// `out_dir`, writes the run directory.
pub fn run_experiment(cfg: &ExperimentConfig, master_seed: u64, out_dir: Option<&Path>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        create_dir(dir)?;
    }
    let run_seeds: Vec<u64> = (0..cfg.runs as u64).map(|r| master_seed.wrapping_add(r)).collect();
    let mut runs = Vec::new();
    let mut diverged = Vec::new();
    let mut final_models = Vec::new();
    for (r, &seed) in run_seeds.iter().enumerate() {
        let out = run_single(cfg, r, seed, out_dir)?;
        if out.diverged {
            diverged.push(r);
        }
        runs.push(out.records);
        final_models.push(out.final_model);
    }
    let summary = summarize_runs(&runs);
    if let Some(dir) = out_dir {
        report::write_rounds(&dir.join("rounds.csv"), &runs)?;
        let (header, row) = report::summary_row(cfg, runs.len(), diverged.len(), &summary);
        report::write_summary(&dir.join("summary.csv"), &header, &[row])?;
        report::write_manifest(&dir.join("manifest.json"), &manifest(cfg, master_seed, &run_seeds, &diverged))?;
    }
    Ok(ExperimentOutcome { runs, run_seeds, diverged, final_models, summary })
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub axis: String,
    pub points: Vec<(String, ExperimentOutcome)>,
}

/// One experiment per axis value, each in `out_dir/{axis}_{value}`, plus a
/// combined `sweep.csv` keyed by axis value.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: &str,
    values: &[String],
    master_seed: u64,
    out_dir: Option<&Path>,
) -> Result<SweepOutcome> {
    let key = ExperimentConfig::axis_key(axis)?;
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut configs = Vec::new();
    for v in values {
        let mut point = cfg.clone();
        point.set(key, v)?;
        point.validate()?;
        configs.push(point);
    }
    if let Some(dir) = out_dir {
        create_dir(dir)?;
    }
    let mut points = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for (v, point) in values.iter().zip(&configs) {
        let sub: Option<PathBuf> = out_dir.map(|d| d.join(format!("{axis}_{v}")));
        let outcome = run_experiment(point, master_seed, sub.as_deref())?;
        let (h, mut row) = report::summary_row(point, outcome.runs.len(), outcome.diverged.len(), &outcome.summary);
        header = ["axis".to_string(), "value".to_string()].into_iter().chain(h).collect();
        row.splice(0..0, [axis.to_string(), v.clone()]);
        rows.push(row);
        points.push((v.clone(), outcome));
    }
    if let Some(dir) = out_dir {
        report::write_summary(&dir.join("sweep.csv"), &header, &rows)?;
    }
    Ok(SweepOutcome { axis: axis.to_string(), points })
}

const ATTACK_COLUMNS: [&str; 8] = ["msr", "dlr", "dpa_a", "dpa_ad", "ba_a", "ba_ad", "la_success", "sra_success"];

/// Final-round attack metrics of every run in `run_dir`. With `recompute`,
/// the clean-model metrics of each run are re-derived from its final
/// checkpoint and compared against the CSV.
pub fn attack_report(run_dir: &Path, recompute: bool) -> Result<String> {
    let manifest = read_manifest(&run_dir.join("manifest.json"))?;
    let cfg = config_from_manifest(&manifest)?;
    let rows = read_rounds(&run_dir.join("rounds.csv"))?;
    let seeds: Vec<u64> = manifest
        .get("run_seeds")
        .and_then(|v| v.as_array())
        .map(|a| a.iter().filter_map(|s| s.as_u64()).collect())
        .unwrap_or_default();

    let mut out = String::new();
    writeln!(out, "scheme {} optimizer {} q {}", cfg.pipeline, cfg.optimizer.name(), fmt_f64(cfg.q)).ok();
    let mut run_ids: Vec<usize> = rows.iter().filter_map(|r| r["run_id"].parse().ok()).collect();
    run_ids.dedup();
    for run_id in run_ids {
        let last = rows
            .iter()
            .filter(|r| r["run_id"].parse() == Ok(run_id))
            .max_by_key(|r| r["round"].parse::<usize>().unwrap_or(0))
            .expect("run has rows");
        let round: usize = last["round"].parse().unwrap_or(0);
        let metrics: Vec<String> = ATTACK_COLUMNS
            .iter()
            .filter(|c| !last[**c].is_empty())
            .map(|c| format!("{c}={}", last[*c]))
            .collect();
        writeln!(out, "run {run_id} round {round}: {}", if metrics.is_empty() { "no attack metrics".into() } else { metrics.join(" ") }).ok();

        if recompute {
            let path = checkpoint_path(run_dir, run_id, round);
            if !path.exists() {
                writeln!(out, "run {run_id}: no checkpoint for round {round}").ok();
                continue;
            }
            let seed = *seeds
                .get(run_id)
                .ok_or_else(|| Error::Format { offset: 0, message: format!("manifest lacks a seed for run {run_id}") })?;
            let model = ModelParams::read_checkpoint(&path)?;
            let env = Environment::prepare(&cfg, seed)?;
            let keys = PipelineKeys::setup(&PrivacyPipeline::default(), &cfg.he, &cfg.smc_config(), &mut RngStream::new(seed, "keys"))?;
            let ctx = RunContext { cfg: &cfg, env: &env, keys: &keys, seed };
            let m = clean_metrics(&model, &ctx)?;
            let pairs = [("acc", Some(m.acc)), ("ld", Some(m.ld)), ("ad", Some(m.ad)), ("msr", m.msr), ("dlr", m.dlr)];
            let mut parts = Vec::new();
            let mut all_match = true;
            for (name, value) in pairs {
                let Some(v) = value else { continue };
                let recorded: Option<f64> = last[name].parse().ok();
                let ok = recorded.is_some_and(|r| r == v || (r - v).abs() <= 1e-12 * v.abs().max(1.0));
                all_match &= ok;
                parts.push(format!("{name}={}", fmt_f64(v)));
            }
            writeln!(
                out,
                "run {run_id} recomputed from checkpoint: {} [{}]",
                parts.join(" "),
                if all_match { "matches" } else { "MISMATCH" }
            )
            .ok();
        }
    }
    Ok(out)
}
