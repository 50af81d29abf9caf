//! Flat `key = value` experiment configuration.
//!
//! Every key has a default taken from the reference setup (batch 512,
//! 20 rounds, 40 epochs, 10 runs, learning rate 0.1, 50 clients, 10%
//! participation). Parsing starts from those defaults and applies each line
//! through [`ExperimentConfig::set`], which is also what sweeps use.

use std::path::{Path, PathBuf};

use crate::attacks::AdversaryConfig;
use crate::dp::{DpConfig, DpPlacement};
use crate::error::{Error, Result};
use crate::he::CkksParams;
use crate::optimizers::{FairnessConfig, OptimizerKind};
use crate::smc::SmcConfig;

use super::pipeline::PrivacyPipeline;

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    SynthDigits,
    SynthTabular,
    /// IDX image/label files from `data.path` or `FEDTRIAD_MNIST_DIR`.
    Mnist,
    Csv,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    pub samples: usize,
    pub features: usize,
    pub fraud_rate: f64,
    pub path: Option<PathBuf>,
    pub test_fraction: f64,
    pub smote: bool,
    pub smote_ratio: f64,
    pub smote_k: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Lr,
    Mlp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionConfig {
    pub mode: String,
    pub clients: usize,
    pub alpha: f64,
    pub fractions: Vec<f64>,
    pub fraction_weights: Vec<f64>,
    pub positive_class: usize,
    pub holdout: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub rounds: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackConfig {
    pub adversary: AdversaryConfig,
    pub msr: bool,
    pub msr_samples: usize,
    pub dlr: bool,
    pub la_attempts: usize,
    pub la_noise: f64,
    pub la_tolerance: f64,
    pub la_samples: usize,
    /// Compromised share holders for the reconstruction attack; defaults to
    /// `t − 1`.
    pub sra_compromised: Option<usize>,
    pub sra_trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportConfig {
    pub dir: PathBuf,
    pub timing: bool,
    /// Extra checkpoint cadence in rounds; the final round is always saved.
    pub checkpoint_every: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: ModelKind,
    pub hidden: usize,
    pub partition: PartitionConfig,
    pub train: TrainConfig,
    pub optimizer: OptimizerKind,
    pub q: f64,
    pub lipschitz: Option<f64>,
    pub pipeline: PrivacyPipeline,
    pub dp: DpConfig,
    pub dp_sensitivity: Option<f64>,
    pub he: CkksParams,
    pub smc: SmcConfig,
    pub smc_threshold: Option<usize>,
    pub attack: AttackConfig,
    pub runs: usize,
    pub seed: Option<u64>,
    pub report: ReportConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataConfig {
                source: DataSource::SynthDigits,
                samples: 10_000,
                features: 30,
                fraud_rate: 0.05,
                path: None,
                test_fraction: 0.2,
                smote: false,
                smote_ratio: 0.5,
                smote_k: 5,
            },
            model: ModelKind::Mlp,
            hidden: 64,
            partition: PartitionConfig {
                mode: "iid".into(),
                clients: 50,
                alpha: 0.5,
                fractions: vec![0.1, 0.01, 0.005],
                fraction_weights: vec![1.0, 1.0, 1.0],
                positive_class: 1,
                holdout: 0.2,
            },
            train: TrainConfig {
                rounds: 20,
                epochs: 40,
                lr: 0.1,
                batch_size: 512,
                fraction: 0.1,
            },
            optimizer: OptimizerKind::QFedAvg,
            q: 0.0,
            lipschitz: None,
            pipeline: PrivacyPipeline::default(),
            dp: DpConfig::new(4.0, DpPlacement::Local),
            dp_sensitivity: None,
            he: CkksParams::default(),
            smc: SmcConfig::default(),
            smc_threshold: None,
            attack: AttackConfig {
                adversary: AdversaryConfig::default(),
                msr: true,
                msr_samples: 500,
                dlr: true,
                la_attempts: 5,
                la_noise: 300.0,
                la_tolerance: 0.0,
                la_samples: 1,
                sra_compromised: None,
                sra_trials: 1000,
            },
            runs: 10,
            seed: None,
            report: ReportConfig {
                dir: PathBuf::from("out"),
                timing: false,
                checkpoint_every: None,
            },
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_trigger(key: &str, value: &str) -> Result<Vec<(usize, f64)>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (i, v) = pair
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("{key}: expected index:value, got {pair:?}")))?;
            Ok((parse_num(key, i.trim())?, parse_num(key, v.trim())?))
        })
        .collect()
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data.source" => {
                self.data.source = match value {
                    "synth_digits" => DataSource::SynthDigits,
                    "synth_tabular" => DataSource::SynthTabular,
                    "mnist" => DataSource::Mnist,
                    "csv" => DataSource::Csv,
                    _ => {
                        return Err(Error::Config(format!(
                            "data.source must be synth_digits, synth_tabular, mnist or csv, got {value:?}"
                        )))
                    }
                }
            }
            "data.samples" => self.data.samples = parse_num(key, value)?,
            "data.features" => self.data.features = parse_num(key, value)?,
            "data.fraud_rate" => self.data.fraud_rate = parse_num(key, value)?,
            "data.path" => self.data.path = Some(PathBuf::from(value)),
            "data.test_fraction" => self.data.test_fraction = parse_num(key, value)?,
            "data.smote" => self.data.smote = parse_bool(key, value)?,
            "data.smote_ratio" => self.data.smote_ratio = parse_num(key, value)?,
            "data.smote_k" => self.data.smote_k = parse_num(key, value)?,
            "model.arch" => {
                self.model = match value {
                    "lr" => ModelKind::Lr,
                    "mlp" => ModelKind::Mlp,
                    _ => return Err(Error::Config(format!("model.arch must be lr or mlp, got {value:?}"))),
                }
            }
            "model.hidden" => self.hidden = parse_num(key, value)?,
            "partition.mode" => self.partition.mode = value.to_string(),
            "partition.clients" => self.partition.clients = parse_num(key, value)?,
            "partition.alpha" => self.partition.alpha = parse_num(key, value)?,
            "partition.fractions" => self.partition.fractions = parse_list(key, value)?,
            "partition.fraction_weights" => self.partition.fraction_weights = parse_list(key, value)?,
            "partition.positive_class" => self.partition.positive_class = parse_num(key, value)?,
            "partition.holdout" => self.partition.holdout = parse_num(key, value)?,
            "train.rounds" => self.train.rounds = parse_num(key, value)?,
            "train.epochs" => self.train.epochs = parse_num(key, value)?,
            "train.lr" => self.train.lr = parse_num(key, value)?,
            "train.batch_size" => self.train.batch_size = parse_num(key, value)?,
            "train.fraction" => self.train.fraction = parse_num(key, value)?,
            "fair.optimizer" => self.optimizer = value.parse()?,
            "fair.q" => self.q = parse_num(key, value)?,
            "fair.lipschitz" => self.lipschitz = Some(parse_num(key, value)?),
            "privacy.pipeline" => self.pipeline = value.parse()?,
            "dp.epsilon" => self.dp.epsilon = parse_num(key, value)?,
            "dp.delta" => self.dp.delta = parse_num(key, value)?,
            "dp.clip_norm" => self.dp.clip_norm = parse_num(key, value)?,
            "dp.sensitivity" => self.dp_sensitivity = Some(parse_num(key, value)?),
            "dp.layer_clip" => self.dp.layer_clip = Some(parse_list(key, value)?),
            "dp.calibration" => {
                self.dp.classic_calibration = match value {
                    "simple" => false,
                    "classic" => true,
                    _ => return Err(Error::Config(format!("dp.calibration must be simple or classic, got {value:?}"))),
                }
            }
            "he.poly_degree" => self.he.poly_degree = parse_num(key, value)?,
            "he.scale_bits" => {
                let bits: i32 = parse_num(key, value)?;
                self.he.scale = 2f64.powi(bits);
            }
            "he.chain_bits" => self.he.coeff_modulus_bits = parse_list(key, value)?,
            "he.error_std" => self.he.error_std = parse_num(key, value)?,
            "smc.num_shares" => self.smc.num_shares = parse_num(key, value)?,
            "smc.threshold" => self.smc_threshold = Some(parse_num(key, value)?),
            "smc.aes_key_bits" => self.smc.aes_key_bits = parse_num(key, value)?,
            "smc.frac_bits" => self.smc.frac_bits = parse_num(key, value)?,
            "smc.value_bits" => self.smc.value_bits = parse_num(key, value)?,
            "attack.beta" => self.attack.adversary.beta = parse_num(key, value)?,
            "attack.poison_fraction" => self.attack.adversary.poison_fraction = parse_num(key, value)?,
            "attack.backdoor_fraction" => self.attack.adversary.backdoor_fraction = parse_num(key, value)?,
            "attack.backdoor_target" => self.attack.adversary.backdoor_target = parse_num(key, value)?,
            "attack.trigger" => self.attack.adversary.trigger = parse_trigger(key, value)?,
            "attack.canary_index" => self.attack.adversary.canary_index = parse_num(key, value)?,
            "attack.msr" => self.attack.msr = parse_bool(key, value)?,
            "attack.msr_samples" => self.attack.msr_samples = parse_num(key, value)?,
            "attack.dlr" => self.attack.dlr = parse_bool(key, value)?,
            "attack.la_attempts" => self.attack.la_attempts = parse_num(key, value)?,
            "attack.la_noise" => self.attack.la_noise = parse_num(key, value)?,
            "attack.la_tolerance" => self.attack.la_tolerance = parse_num(key, value)?,
            "attack.la_samples" => self.attack.la_samples = parse_num(key, value)?,
            "attack.sra_compromised" => self.attack.sra_compromised = Some(parse_num(key, value)?),
            "attack.sra_trials" => self.attack.sra_trials = parse_num(key, value)?,
            "run.runs" => self.runs = parse_num(key, value)?,
            "run.seed" => self.seed = Some(parse_num(key, value)?),
            "report.dir" => self.report.dir = PathBuf::from(value),
            "report.timing" => self.report.timing = parse_bool(key, value)?,
            "report.checkpoint_every" => self.report.checkpoint_every = Some(parse_num(key, value)?),
            _ => return Err(Error::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    /// Config key behind a sweep axis name.
    pub fn axis_key(axis: &str) -> Result<&'static str> {
        match axis {
            "q" => Ok("fair.q"),
            "epsilon" => Ok("dp.epsilon"),
            "poly_degree" => Ok("he.poly_degree"),
            "shares" => Ok("smc.num_shares"),
            _ => Err(Error::Config(format!(
                "sweep axis must be q, epsilon, poly_degree or shares, got {axis:?}"
            ))),
        }
    }

    /// SMC settings with the threshold default applied.
    pub fn smc_config(&self) -> SmcConfig {
        let mut smc = self.smc.clone();
        smc.threshold = self.smc_threshold.unwrap_or((smc.num_shares + 2) / 2);
        smc
    }

    pub fn dp_config(&self) -> DpConfig {
        let mut dp = self.dp.clone();
        dp.sensitivity = self.dp_sensitivity.unwrap_or(dp.clip_norm);
        if let Some(placement) = self.pipeline.dp_placement() {
            dp.placement = placement;
        }
        dp
    }

    pub fn fairness(&self) -> FairnessConfig {
        FairnessConfig {
            q: self.q,
            lipschitz: self.lipschitz.unwrap_or(1.0 / self.train.lr),
            optimizer: self.optimizer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.runs == 0 {
            return err("run.runs must be at least 1".into());
        }
        if self.data.samples < 2 {
            return err("data.samples must be at least 2".into());
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return err(format!("data.test_fraction must lie in (0, 1), got {}", self.data.test_fraction));
        }
        if !(self.partition.holdout > 0.0 && self.partition.holdout < 1.0) {
            return err(format!("partition.holdout must lie in (0, 1), got {}", self.partition.holdout));
        }
        if self.data.source == DataSource::SynthTabular && self.data.features == 0 {
            return err("data.features must be positive".into());
        }
        if self.data.smote && !(self.data.smote_ratio > 0.0 && self.data.smote_ratio < 1.0) {
            return err("data.smote_ratio must lie in (0, 1)".into());
        }
        if matches!(self.data.source, DataSource::Csv) && self.data.path.is_none() {
            return err("data.source = csv needs data.path".into());
        }
        if self.partition.clients == 0 {
            return err("partition.clients must be at least 1".into());
        }
        if !["iid", "dirichlet", "label_fraction"].contains(&self.partition.mode.as_str()) {
            return err(format!(
                "partition.mode must be iid, dirichlet or label_fraction, got {:?}",
                self.partition.mode
            ));
        }
        if self.model == ModelKind::Mlp && self.hidden == 0 {
            return err("model.hidden must be positive".into());
        }
        let t = &self.train;
        if t.rounds == 0 || t.epochs == 0 || t.batch_size == 0 {
            return err("train.rounds, train.epochs and train.batch_size must be positive".into());
        }
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return err(format!("train.lr must be positive, got {}", t.lr));
        }
        if !(t.fraction > 0.0 && t.fraction <= 1.0) {
            return err(format!("train.fraction must lie in (0, 1], got {}", t.fraction));
        }
        self.fairness().validate()?;
        if self.pipeline.uses_dp() {
            self.dp_config().validate()?;
        }
        if self.pipeline.uses_he() {
            if ![1024, 4096, 8192, 16384].contains(&self.he.poly_degree) {
                return err(format!(
                    "he.poly_degree must be 1024, 4096, 8192 or 16384, got {}",
                    self.he.poly_degree
                ));
            }
            self.he.validate()?;
            if self.he.error_std <= 0.0 {
                return err("he.error_std must be positive".into());
            }
        }
        if self.pipeline.uses_smc() {
            self.smc_config().validate()?;
            if let Some(c) = self.attack.sra_compromised {
                if c > self.smc.num_shares {
                    return err(format!("attack.sra_compromised {c} exceeds smc.num_shares"));
                }
            }
        }
        let features = match self.data.source {
            DataSource::SynthDigits | DataSource::Mnist => 784,
            DataSource::SynthTabular => self.data.features,
            DataSource::Csv => usize::MAX,
        };
        let classes = match self.data.source {
            DataSource::SynthDigits | DataSource::Mnist => 10,
            DataSource::SynthTabular => 2,
            DataSource::Csv => usize::MAX,
        };
        if self.attack.adversary.beta > 0.0 {
            self.attack.adversary.validate(features, classes)?;
        }
        Ok(())
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn resolved_pairs(&self) -> Vec<(String, String)> {
        let smc = self.smc_config();
        let dp = self.dp_config();
        let fair = self.fairness();
        let a = &self.attack;
        let source = match self.data.source {
            DataSource::SynthDigits => "synth_digits",
            DataSource::SynthTabular => "synth_tabular",
            DataSource::Mnist => "mnist",
            DataSource::Csv => "csv",
        };
        let pairs: Vec<(&str, String)> = vec![
            ("data.source", source.into()),
            ("data.samples", self.data.samples.to_string()),
            ("data.features", self.data.features.to_string()),
            ("data.fraud_rate", self.data.fraud_rate.to_string()),
            ("data.path", self.data.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("data.test_fraction", self.data.test_fraction.to_string()),
            ("data.smote", self.data.smote.to_string()),
            ("data.smote_ratio", self.data.smote_ratio.to_string()),
            ("data.smote_k", self.data.smote_k.to_string()),
            ("model.arch", if self.model == ModelKind::Lr { "lr" } else { "mlp" }.into()),
            ("model.hidden", self.hidden.to_string()),
            ("partition.mode", self.partition.mode.clone()),
            ("partition.clients", self.partition.clients.to_string()),
            ("partition.alpha", self.partition.alpha.to_string()),
            ("partition.fractions", join(&self.partition.fractions)),
            ("partition.fraction_weights", join(&self.partition.fraction_weights)),
            ("partition.positive_class", self.partition.positive_class.to_string()),
            ("partition.holdout", self.partition.holdout.to_string()),
            ("train.rounds", self.train.rounds.to_string()),
            ("train.epochs", self.train.epochs.to_string()),
            ("train.lr", self.train.lr.to_string()),
            ("train.batch_size", self.train.batch_size.to_string()),
            ("train.fraction", self.train.fraction.to_string()),
            ("fair.optimizer", fair.optimizer.name().into()),
            ("fair.q", fair.q.to_string()),
            ("fair.lipschitz", fair.lipschitz.to_string()),
            ("privacy.pipeline", self.pipeline.to_string()),
            ("dp.epsilon", dp.epsilon.to_string()),
            ("dp.delta", dp.delta.to_string()),
            ("dp.clip_norm", dp.clip_norm.to_string()),
            ("dp.sensitivity", dp.sensitivity.to_string()),
            ("dp.layer_clip", dp.layer_clip.as_deref().map(join).unwrap_or_default()),
            ("dp.calibration", if dp.classic_calibration { "classic" } else { "simple" }.into()),
            ("he.poly_degree", self.he.poly_degree.to_string()),
            ("he.scale_bits", self.he.scale.log2().to_string()),
            ("he.chain_bits", join(&self.he.coeff_modulus_bits)),
            ("he.error_std", self.he.error_std.to_string()),
            ("smc.num_shares", smc.num_shares.to_string()),
            ("smc.threshold", smc.threshold.to_string()),
            ("smc.aes_key_bits", smc.aes_key_bits.to_string()),
            ("smc.frac_bits", smc.frac_bits.to_string()),
            ("smc.value_bits", smc.value_bits.to_string()),
            ("attack.beta", a.adversary.beta.to_string()),
            ("attack.poison_fraction", a.adversary.poison_fraction.to_string()),
            ("attack.backdoor_fraction", a.adversary.backdoor_fraction.to_string()),
            ("attack.backdoor_target", a.adversary.backdoor_target.to_string()),
            (
                "attack.trigger",
                a.adversary.trigger.iter().map(|(i, v)| format!("{i}:{v}")).collect::<Vec<_>>().join(","),
            ),
            ("attack.canary_index", a.adversary.canary_index.to_string()),
            ("attack.msr", a.msr.to_string()),
            ("attack.msr_samples", a.msr_samples.to_string()),
            ("attack.dlr", a.dlr.to_string()),
            ("attack.la_attempts", a.la_attempts.to_string()),
            ("attack.la_noise", a.la_noise.to_string()),
            ("attack.la_tolerance", a.la_tolerance.to_string()),
            ("attack.la_samples", a.la_samples.to_string()),
            (
                "attack.sra_compromised",
                a.sra_compromised.unwrap_or(smc.threshold.saturating_sub(1)).to_string(),
            ),
            ("attack.sra_trials", a.sra_trials.to_string()),
            ("run.runs", self.runs.to_string()),
            ("report.timing", self.report.timing.to_string()),
            (
                "report.checkpoint_every",
                self.report.checkpoint_every.map(|c| c.to_string()).unwrap_or_default(),
            ),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Canonical text of the resolved configuration; unset optional keys are
    /// left out.
    pub fn canonical_text(&self) -> String {
        self.resolved_pairs()
            .into_iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Master seed precedence: explicit override, then `run.seed`, then the
/// `FEDTRIAD_SEED` environment variable, then 0.
pub fn resolve_seed(cli: Option<u64>, cfg: &ExperimentConfig) -> Result<u64> {
    if let Some(s) = cli.or(cfg.seed) {
        return Ok(s);
    }
    match std::env::var("FEDTRIAD_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("FEDTRIAD_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let cfg = ExperimentConfig::default();
        assert_eq!(
            (cfg.train.batch_size, cfg.train.rounds, cfg.train.epochs, cfg.runs, cfg.partition.clients),
            (512, 20, 40, 10, 50)
        );
        assert_eq!((cfg.train.lr, cfg.train.fraction), (0.1, 0.1));
        assert_eq!(cfg.fairness().lipschitz, 10.0);
        assert_eq!(cfg.smc_config().threshold, 4);
        cfg.validate().unwrap();
    }

    #[test]
    fn parses_comments_and_values() {
        let cfg = ExperimentConfig::parse(
            "# smoke\ntrain.rounds = 3  # short\nfair.q = 1.5\nprivacy.pipeline = ldp+he\nattack.trigger = 1:0.5, 2:1\n",
        )
        .unwrap();
        assert_eq!(cfg.train.rounds, 3);
        assert_eq!(cfg.q, 1.5);
        assert_eq!(cfg.pipeline.to_string(), "ldp+he");
        assert_eq!(cfg.attack.adversary.trigger, vec![(1, 0.5), (2, 1.0)]);
    }

    #[test]
    fn errors_name_the_key() {
        for (text, key) in [
            ("train.rounds = many", "train.rounds"),
            ("bogus.key = 1", "bogus.key"),
            ("fair.q = 1\nfair.q = 2", "fair.q"),
        ] {
            let msg = ExperimentConfig::parse(text).unwrap_err().to_string();
            assert!(msg.contains(key), "{msg}");
        }
        let cfg = ExperimentConfig::parse("privacy.pipeline = smc\nsmc.num_shares = 3\nsmc.threshold = 5").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("smc.threshold"));
    }

    #[test]
    fn threshold_follows_share_count_unless_set() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("smc.num_shares", "9").unwrap();
        assert_eq!(cfg.smc_config().threshold, 5);
        cfg.set("smc.threshold", "2").unwrap();
        cfg.set("smc.num_shares", "3").unwrap();
        assert_eq!(cfg.smc_config().threshold, 2);
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = ExperimentConfig::parse("privacy.pipeline = gdp+smc\nfair.q = 5\ndp.layer_clip = 1,0.5").unwrap();
        cfg.seed = None;
        let again = ExperimentConfig::parse(&cfg.canonical_text()).unwrap();
        assert_eq!(again.canonical_text(), cfg.canonical_text());
    }

    #[test]
    fn seed_precedence() {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = Some(7);
        assert_eq!(resolve_seed(Some(3), &cfg).unwrap(), 3);
        assert_eq!(resolve_seed(None, &cfg).unwrap(), 7);
    }
}
