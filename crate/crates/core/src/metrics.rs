//! Fairness and utility metrics, plus cross-run summaries.

use crate::error::{Error, Result};
use crate::numerics::{predict, Architecture, Batch, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClientEval {
    pub client_id: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// `(1/K) Σ (x_k − x̄)²`.
pub fn population_variance(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("variance of an empty set".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
}

/// Sample standard deviation (`n − 1` denominator); zero for one value.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn loss_disparity(evals: &[ClientEval]) -> Result<f64> {
    population_variance(&evals.iter().map(|e| e.loss).collect::<Vec<_>>())
}

pub fn accuracy_disparity(evals: &[ClientEval]) -> Result<f64> {
    population_variance(&evals.iter().map(|e| e.accuracy).collect::<Vec<_>>())
}

/// Fraction of `test` predicted correctly.
pub fn global_accuracy(model: &ModelParams, arch: &Architecture, test: &Batch) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let predictions = predict(model, arch, test)?;
    let hits = predictions.iter().zip(&test.labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / test.len() as f64)
}

/// Mean and population variance of per-client attack accuracies.
pub fn attack_disparities(per_client: &[f64]) -> Result<(f64, f64)> {
    let variance = population_variance(per_client)?;
    Ok((per_client.iter().sum::<f64>() / per_client.len() as f64, variance))
}

/// One row of the per-round report. Metrics that do not apply are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub run_id: usize,
    pub round: usize,
    pub scheme: String,
    pub optimizer: String,
    pub q: f64,
    pub epsilon: Option<f64>,
    pub poly_degree: Option<usize>,
    pub shares: Option<usize>,
    pub acc: Option<f64>,
    pub ld: Option<f64>,
    pub ad: Option<f64>,
    pub msr: Option<f64>,
    pub dlr: Option<f64>,
    pub dpa_a: Option<f64>,
    pub dpa_ad: Option<f64>,
    pub ba_a: Option<f64>,
    pub ba_ad: Option<f64>,
    pub la_success: Option<f64>,
    pub sra_success: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl RoundRecord {
    pub const METRICS: [&'static str; 11] =
        ["acc", "ld", "ad", "msr", "dlr", "dpa_a", "dpa_ad", "ba_a", "ba_ad", "la_success", "sra_success"];

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "acc" => self.acc,
            "ld" => self.ld,
            "ad" => self.ad,
            "msr" => self.msr,
            "dlr" => self.dlr,
            "dpa_a" => self.dpa_a,
            "dpa_ad" => self.dpa_ad,
            "ba_a" => self.ba_a,
            "ba_ad" => self.ba_ad,
            "la_success" => self.la_success,
            "sra_success" => self.sra_success,
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    /// Runs contributing a finite value.
    pub count: usize,
}

/// Mean and sample std of every metric at each run's last recorded round.
/// Runs whose value is missing or non-finite are left out of that metric.
pub fn summarize_runs(runs: &[Vec<RoundRecord>]) -> Vec<MetricSummary> {
    let finals: Vec<&RoundRecord> = runs.iter().filter_map(|r| r.last()).collect();
    RoundRecord::METRICS
        .iter()
        .filter_map(|&name| {
            let values: Vec<f64> = finals
                .iter()
                .filter_map(|r| r.metric(name))
                .filter(|v| v.is_finite())
                .collect();
            if values.is_empty() {
                return None;
            }
            Some(MetricSummary {
                metric: name.to_string(),
                mean: values.iter().sum::<f64>() / values.len() as f64,
                std: sample_std(&values),
                count: values.len(),
            })
        })
        .collect()
}
