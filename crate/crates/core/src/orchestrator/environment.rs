use std::path::PathBuf;

use super::config::{DataSource, ExperimentConfig, ModelKind};
use crate::data::{load_csv, load_idx, partition, smote, synth_digits, synth_tabular, Dataset, PartitionMode, PartitionSpec};
use crate::error::{Error, Result};
use crate::numerics::{Architecture, Batch};
use crate::rng::RngStream;

/// A client's training rows and its fixed held-out split.
#[derive(Clone, Debug)]
pub struct ClientData {
    pub client_id: usize,
    pub train: Batch,
    pub holdout: Batch,
    pub p_k: f64,
}

/// Everything a run needs that depends only on the config and run seed.
#[derive(Clone, Debug)]
pub struct Environment {
    pub arch: Architecture,
    pub num_classes: usize,
    pub test: Batch,
    pub clients: Vec<ClientData>,
}

fn mnist_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    if let Some(p) = &cfg.data.path {
        return Ok(p.clone());
    }
    std::env::var_os("FEDTRIAD_MNIST_DIR").map(PathBuf::from).ok_or_else(|| {
        Error::Config("data.source = mnist needs data.path or FEDTRIAD_MNIST_DIR".into())
    })
}

fn cap(dataset: Dataset, samples: usize, rng: &mut RngStream) -> Dataset {
    if dataset.len() <= samples {
        return dataset;
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    rng.shuffle(&mut order);
    order.truncate(samples);
    order.sort_unstable();
    dataset.subset(&order)
}

pub fn load_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    let d = &cfg.data;
    let mut rng = RngStream::new(seed, "data:subset");
    match d.source {
        DataSource::SynthDigits => synth_digits(d.samples, seed),
        DataSource::SynthTabular => synth_tabular(d.samples, d.features, d.fraud_rate, seed),
        DataSource::Mnist => {
            let dir = mnist_dir(cfg)?;
            let full = load_idx(&dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte"))?;
            Ok(cap(full, d.samples, &mut rng))
        }
        DataSource::Csv => {
            let path = d.path.as_ref().ok_or_else(|| Error::Config("data.source = csv needs data.path".into()))?;
            Ok(cap(load_csv(path)?, d.samples, &mut rng))
        }
    }
}

pub fn architecture(cfg: &ExperimentConfig, inputs: usize, classes: usize) -> Architecture {
    match cfg.model {
        ModelKind::Lr => Architecture::LogisticRegression { inputs, classes },
        ModelKind::Mlp => Architecture::Mlp { inputs, hidden: cfg.hidden, classes },
    }
}

fn split_holdout(rows: &Batch, fraction: f64, rng: &mut RngStream) -> (Batch, Batch) {
    let n = rows.len();
    if n < 2 {
        return (rows.clone(), rows.clone());
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let held = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let (h, t) = order.split_at(held);
    (rows.select(t), rows.select(h))
}

impl Environment {
    pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let dataset = load_dataset(cfg, seed)?;
        let (mut train, test) = dataset.train_test_split(cfg.data.test_fraction, &mut RngStream::new(seed, "split"));
        if cfg.data.smote {
            let counts = train.class_counts();
            let minority = (0..counts.len()).filter(|&c| counts[c] > 0).min_by_key(|&c| counts[c]).unwrap_or(0);
            train = smote(&train, minority, cfg.data.smote_k, cfg.data.smote_ratio, &mut RngStream::new(seed, "smote"))?;
        }
        let p = &cfg.partition;
        let mode = match p.mode.as_str() {
            "iid" => PartitionMode::Iid,
            "dirichlet" => PartitionMode::Dirichlet { alpha: p.alpha },
            _ => PartitionMode::LabelFraction {
                fractions: p.fractions.clone(),
                weights: p.fraction_weights.clone(),
                positive_class: p.positive_class,
            },
        };
        let shards = partition(&train, &PartitionSpec { mode, clients: p.clients, seed })?;
        let clients = shards
            .into_iter()
            .map(|s| {
                let rows = train.samples.select(&s.indices);
                let mut rng = RngStream::new(seed, format!("holdout:{}", s.client_id));
                let (train, holdout) = split_holdout(&rows, p.holdout, &mut rng);
                ClientData { client_id: s.client_id, train, holdout, p_k: s.p_k }
            })
            .collect();
        Ok(Self {
            arch: architecture(cfg, dataset.width(), dataset.num_classes),
            num_classes: dataset.num_classes,
            test: test.samples,
            clients,
        })
    }

    pub fn train_shards(&self) -> Vec<Batch> {
        self.clients.iter().map(|c| c.train.clone()).collect()
    }
}
