//! CSV reports and the run manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{MetricSummary, RoundRecord};

pub const ROUNDS_HEADER: [&str; 20] = [
    "run_id", "round", "scheme", "optimizer", "q", "epsilon", "poly_degree", "shares", "acc", "ld", "ad", "msr",
    "dlr", "dpa_a", "dpa_ad", "ba_a", "ba_ad", "la_success", "sra_success", "wall_ms",
];

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_f(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn record_row(r: &RoundRecord) -> Vec<String> {
    vec![
        r.run_id.to_string(),
        r.round.to_string(),
        r.scheme.clone(),
        r.optimizer.clone(),
        fmt_f64(r.q),
        opt_f(r.epsilon),
        opt(r.poly_degree),
        opt(r.shares),
        opt_f(r.acc),
        opt_f(r.ld),
        opt_f(r.ad),
        opt_f(r.msr),
        opt_f(r.dlr),
        opt_f(r.dpa_a),
        opt_f(r.dpa_ad),
        opt_f(r.ba_a),
        opt_f(r.ba_ad),
        opt_f(r.la_success),
        opt_f(r.sra_success),
        opt_f(r.wall_ms),
    ]
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format { offset: 0, message: format!("{}: {other:?}", path.display()) },
    }
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_rounds(path: &Path, runs: &[Vec<RoundRecord>]) -> Result<()> {
    let header: Vec<String> = ROUNDS_HEADER.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = runs.iter().flatten().map(record_row).collect();
    write_rows(path, &header, &rows)
}

/// Identifying columns of a configuration in summary tables.
fn tag_columns(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let p = &cfg.pipeline;
    vec![
        ("scheme".into(), p.to_string()),
        ("optimizer".into(), cfg.optimizer.name().into()),
        ("q".into(), fmt_f64(cfg.q)),
        ("epsilon".into(), if p.uses_dp() { fmt_f64(cfg.dp.epsilon) } else { String::new() }),
        ("poly_degree".into(), if p.uses_he() { cfg.he.poly_degree.to_string() } else { String::new() }),
        ("shares".into(), if p.uses_smc() { cfg.smc.num_shares.to_string() } else { String::new() }),
    ]
}

/// Header and single row of the wide per-config summary.
pub fn summary_row(cfg: &ExperimentConfig, runs: usize, diverged: usize, summary: &[MetricSummary]) -> (Vec<String>, Vec<String>) {
    let mut header = Vec::new();
    let mut row = Vec::new();
    for (k, v) in tag_columns(cfg) {
        header.push(k);
        row.push(v);
    }
    header.push("runs".into());
    row.push(runs.to_string());
    header.push("diverged".into());
    row.push(diverged.to_string());
    for name in RoundRecord::METRICS {
        let found = summary.iter().find(|s| s.metric == name);
        header.push(format!("{name}_mean"));
        row.push(found.map(|s| fmt_f64(s.mean)).unwrap_or_default());
        header.push(format!("{name}_std"));
        row.push(found.map(|s| fmt_f64(s.std)).unwrap_or_default());
    }
    (header, row)
}

pub fn write_summary(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    write_rows(path, header, rows)
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.canonical_text().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest(cfg: &ExperimentConfig, master_seed: u64, run_seeds: &[u64], diverged: &[usize]) -> Value {
    let config: BTreeMap<String, String> = cfg.resolved_pairs().into_iter().collect();
    let stages: Vec<&str> = cfg.pipeline.stages().iter().map(|s| s.name()).collect();
    json!({
        "software": "fedtriad",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "config_hash": config_hash(cfg),
        "pipeline_stages": stages,
        "master_seed": master_seed,
        "run_seeds": run_seeds,
        "diverged_runs": diverged,
    })
}

pub fn write_manifest(path: &Path, manifest: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Format { offset: 0, message: e.to_string() })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format { offset: e.column() as u64, message: format!("{}: {e}", path.display()) })
}

/// Rebuilds the resolved configuration recorded in a manifest.
pub fn config_from_manifest(manifest: &Value) -> Result<ExperimentConfig> {
    let map = manifest
        .get("config")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::Format { offset: 0, message: "manifest has no config object".into() })?;
    let mut cfg = ExperimentConfig::default();
    for (k, v) in map {
        let v = v.as_str().unwrap_or_default();
        if !v.is_empty() {
            cfg.set(k, v)?;
        }
    }
    Ok(cfg)
}

/// Rows of a rounds CSV as header-keyed maps.
pub fn read_rounds(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ROUNDS_HEADER {
        return Err(Error::Format { offset: 0, message: format!("{}: unexpected header", path.display()) });
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            Ok(header.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        })
        .collect()
}
