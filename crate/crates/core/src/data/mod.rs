//! Datasets, loaders, synthetic substitutes, client partitioning and SMOTE.

mod idx;
mod partition;
mod smote;
mod synth;
mod tabular;

pub use idx::{load_idx, parse_idx_images, parse_idx_labels};
pub use partition::{partition, ClientShard, PartitionMode, PartitionSpec};
pub use smote::{smote, smote_logged, SmoteDraw};
pub use synth::{synth_digits, synth_tabular, synth_tabular_with, TabularSpec};
pub use tabular::load_csv;

use crate::error::{Error, Result};
use crate::numerics::Batch;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub num_classes: usize,
    pub samples: Batch,
}

impl Dataset {
    pub fn new(name: impl Into<String>, num_classes: usize, samples: Batch) -> Result<Self> {
        if let Some(&bad) = samples.labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidInput(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        if samples.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(Self {
            name: name.into(),
            num_classes,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn width(&self) -> usize {
        self.samples.width
    }

    pub fn class_counts(&self) -> Vec<usize> {
        class_histogram(&self.samples.labels, self.num_classes)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            num_classes: self.num_classes,
            samples: self.samples.select(indices),
        }
    }

    /// Shuffled split into `(train, test)` with `round(test_fraction · n)`
    /// test rows.
    pub fn train_test_split(&self, test_fraction: f64, rng: &mut RngStream) -> (Dataset, Dataset) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        rng.shuffle(&mut order);
        let n_test = ((self.len() as f64) * test_fraction).round() as usize;
        let (test, train) = order.split_at(n_test.min(self.len()));
        (self.subset(train), self.subset(test))
    }
}

pub fn class_histogram(labels: &[usize], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for &y in labels {
        counts[y] += 1;
    }
    counts
}
