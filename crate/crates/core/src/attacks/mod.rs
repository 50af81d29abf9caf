//! Adversarial evaluations run against trained models, client shards and the
//! secure-aggregation primitives.

mod dlr;
mod lattice;
mod mia;
mod poison;
mod sra;

pub use dlr::dlr_canary;
pub use lattice::{la_toy_success, toy_degree_for, ToyLweParams};
pub use mia::{
    best_threshold, msr_calibrated, msr_confidence_gap, msr_threshold_classifier, true_label_confidence,
};
pub use poison::{backdoor_success, plant_backdoor, poison_shards, select_compromised};
pub use sra::sra_success;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryConfig {
    /// Fraction of clients the adversary controls.
    pub beta: f64,
    pub poison_fraction: f64,
    pub backdoor_fraction: f64,
    pub backdoor_target: usize,
    /// `(feature index, value)` pairs written into triggered samples.
    pub trigger: Vec<(usize, f64)>,
    /// Test-set row used as the canary, taken modulo the test set size and
    /// probed against client 0's training shard.
    pub canary_index: usize,
    pub seed: u64,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            poison_fraction: 0.10,
            backdoor_fraction: 0.10,
            backdoor_target: 0,
            trigger: vec![(781, 1.0), (782, 1.0), (783, 1.0)],
            canary_index: 0,
            seed: 0,
        }
    }
}

impl AdversaryConfig {
    pub fn validate(&self, features: usize, classes: usize) -> Result<()> {
        for (key, v) in [
            ("attack.beta", self.beta),
            ("attack.poison_fraction", self.poison_fraction),
            ("attack.backdoor_fraction", self.backdoor_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{key} must lie in [0, 1], got {v}")));
            }
        }
        if self.backdoor_target >= classes {
            return Err(Error::Config(format!(
                "attack.backdoor_target {} outside [0, {classes})",
                self.backdoor_target
            )));
        }
        if let Some(&(i, _)) = self.trigger.iter().find(|(i, _)| *i >= features) {
            return Err(Error::Config(format!("attack.trigger index {i} exceeds feature count {features}")));
        }
        Ok(())
    }
}

/// Attack metrics for one evaluation; `None` where not applicable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttackReport {
    pub msr: Option<f64>,
    pub dlr: Option<f64>,
    pub dpa_a: Option<f64>,
    pub dpa_ad: Option<f64>,
    pub ba_a: Option<f64>,
    pub ba_ad: Option<f64>,
    pub la_success: Option<f64>,
    pub sra_success: Option<f64>,
}
