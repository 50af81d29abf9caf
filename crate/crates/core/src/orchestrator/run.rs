use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::environment::Environment;
use super::pipeline::{secure_sum, AggregationInput, PipelineKeys};
use crate::attacks::{
    backdoor_success, dlr_canary, la_toy_success, msr_calibrated, plant_backdoor,
    poison_shards, sra_success, toy_degree_for, ToyLweParams,
};
use crate::error::{Error, Result};
use crate::metrics::{accuracy_disparity, attack_disparities, global_accuracy, loss_disparity, ClientEval, RoundRecord};
use crate::numerics::{Batch, ModelParams, TrainSchedule};
use crate::optimizers::{apply_aggregate, local_contribution, mean_loss};
use crate::rng::RngStream;

/// Modulus of the toy ring used by the lattice-attack estimator.
pub const TOY_MODULUS: u32 = 3329;

/// `m` distinct clients drawn in sequence, each with probability proportional
/// to its remaining `p_k`. Returned ascending.
pub fn sample_clients(p: &[f64], m: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut weights = p.to_vec();
    let mut chosen = Vec::with_capacity(m);
    for _ in 0..m.min(p.len()) {
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut idx = None;
            for (i, &w) in weights.iter().enumerate() {
                acc += w;
                if w > 0.0 && target < acc {
                    idx = Some(i);
                    break;
                }
            }
            idx.unwrap_or_else(|| weights.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            let open: Vec<usize> = (0..weights.len()).filter(|i| !chosen.contains(i)).collect();
            open[rng.below(open.len())]
        };
        weights[pick] = 0.0;
        chosen.push(pick);
    }
    chosen.sort_unstable();
    chosen
}

/// Clients in a round: `⌈fraction · K⌉`.
pub fn clients_per_round(cfg: &ExperimentConfig) -> usize {
    ((cfg.train.fraction * cfg.partition.clients as f64).ceil() as usize).clamp(1, cfg.partition.clients)
}

/// Everything fixed for one run's rounds.
pub struct RunContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub env: &'a Environment,
    pub keys: &'a PipelineKeys,
    pub seed: u64,
}

/// One global round from `model` over the given client shards.
pub fn run_round(ctx: &RunContext<'_>, shards: &[Batch], model: &ModelParams, round: usize) -> Result<ModelParams> {
    let cfg = ctx.cfg;
    let p: Vec<f64> = ctx.env.clients.iter().map(|c| c.p_k).collect();
    let selected = sample_clients(&p, clients_per_round(cfg), &mut RngStream::new(ctx.seed, format!("sample:{round}")));
    let fairness = cfg.fairness();
    let schedule = TrainSchedule { epochs: cfg.train.epochs, lr: cfg.train.lr, batch_size: cfg.train.batch_size };
    let mut contributions = selected
        .par_iter()
        .map(|&k| {
            let mut rng = RngStream::new(ctx.seed, format!("train:{round}:{k}"));
            local_contribution(k, model, &ctx.env.arch, &shards[k], &fairness, &schedule, &mut rng, round)
        })
        .collect::<Result<Vec<_>>>()?;
    contributions.sort_by_key(|c| c.client_id);

    let h_total: f64 = contributions.iter().map(|c| c.h).sum();
    if !h_total.is_finite() || contributions.iter().any(|c| c.delta.as_plain().map_or(true, |d| d.iter().any(|v| !v.is_finite()))) {
        return Err(Error::Divergence { round, epoch: cfg.train.epochs - 1 });
    }
    let dp = cfg.dp_config();
    let layers = model.layer_ranges();
    let input = AggregationInput { pipeline: &cfg.pipeline, dp: &dp, layers: &layers, keys: ctx.keys, dim: model.dim() };
    let updates = contributions.into_iter().map(|c| c.delta).collect();
    let sum = secure_sum(updates, &input, &RngStream::new(ctx.seed, format!("round:{round}")))?;
    let next = apply_aggregate(model, &sum, h_total)?;
    if !next.is_finite() {
        return Err(Error::Divergence { round, epoch: cfg.train.epochs - 1 });
    }
    Ok(next)
}

fn accuracy(model: &ModelParams, ctx: &RunContext<'_>, batch: &Batch) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    global_accuracy(model, &ctx.env.arch, batch)
}

/// Per-client loss on the training shard and accuracy on the held-out split.
pub fn client_evals(model: &ModelParams, ctx: &RunContext<'_>) -> Result<Vec<ClientEval>> {
    ctx.env
        .clients
        .iter()
        .map(|c| {
            Ok(ClientEval {
                client_id: c.client_id,
                loss: mean_loss(model, &ctx.env.arch, &c.train)?,
                accuracy: accuracy(model, ctx, &c.holdout)?,
            })
        })
        .collect()
}

/// Members from the clients' training rows and non-members from the test set,
/// `min(N, |members|, |test|)` of each.
pub fn msr_sets(ctx: &RunContext<'_>) -> (Batch, Batch) {
    let width = ctx.env.test.width;
    let mut members = Batch::empty(width);
    for c in &ctx.env.clients {
        members = members.concat(&c.train);
    }
    let n = ctx.cfg.attack.msr_samples.min(members.len()).min(ctx.env.test.len());
    let mut rng = RngStream::new(ctx.seed, "msr:select");
    let mut pick = |len: usize| {
        let mut order: Vec<usize> = (0..len).collect();
        rng.shuffle(&mut order);
        order.truncate(n);
        order
    };
    let in_rows = pick(members.len());
    let out_rows = pick(ctx.env.test.len());
    (members.select(&in_rows), ctx.env.test.select(&out_rows))
}

/// Metrics of the clean model that are recomputable from its checkpoint.
pub struct CleanMetrics {
    pub acc: f64,
    pub ld: f64,
    pub ad: f64,
    pub msr: Option<f64>,
    pub dlr: Option<f64>,
}

pub fn clean_metrics(model: &ModelParams, ctx: &RunContext<'_>) -> Result<CleanMetrics> {
    let acc = accuracy(model, ctx, &ctx.env.test)?;
    let evals = client_evals(model, ctx)?;
    let msr = if ctx.cfg.attack.msr {
        let (held_in, held_out) = msr_sets(ctx);
        if held_in.len() >= 2 {
            Some(msr_calibrated(model, &ctx.env.arch, &held_in, &held_out)?)
        } else {
            None
        }
    } else {
        None
    };
    let dlr = if ctx.cfg.attack.dlr && !ctx.env.test.is_empty() {
        let i = ctx.cfg.attack.adversary.canary_index % ctx.env.test.len();
        let shard = &ctx.env.clients[0].train;
        Some(dlr_canary(model, &ctx.env.arch, shard, ctx.env.test.row(i), ctx.env.test.labels[i])?)
    } else {
        None
    };
    Ok(CleanMetrics { acc, ld: loss_disparity(&evals)?, ad: accuracy_disparity(&evals)?, msr, dlr })
}

/// Per-client rate of triggered held-out samples sent to the target class.
fn backdoor_per_client(model: &ModelParams, ctx: &RunContext<'_>) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for c in &ctx.env.clients {
        if let Some(rate) = backdoor_success(model, &ctx.env.arch, &c.holdout, &ctx.cfg.attack.adversary)? {
            out.push(rate);
        }
    }
    Ok(out)
}

/// Client-level variance of an attack statistic, `None` without clients.
fn spread(per_client: &[f64]) -> Result<Option<f64>> {
    if per_client.is_empty() {
        return Ok(None);
    }
    Ok(Some(attack_disparities(per_client)?.1))
}

fn per_client_accuracy(model: &ModelParams, ctx: &RunContext<'_>) -> Result<Vec<f64>> {
    ctx.env.clients.iter().map(|c| accuracy(model, ctx, &c.holdout)).collect()
}

/// Result of one run.
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub final_model: Option<ModelParams>,
    pub diverged: bool,
}

fn blank_record(ctx: &RunContext<'_>, run_id: usize, round: usize) -> RoundRecord {
    let cfg = ctx.cfg;
    let pipeline = &cfg.pipeline;
    RoundRecord {
        run_id,
        round,
        scheme: pipeline.to_string(),
        optimizer: cfg.optimizer.name().to_string(),
        q: cfg.q,
        epsilon: pipeline.uses_dp().then_some(cfg.dp.epsilon),
        poly_degree: pipeline.uses_he().then_some(cfg.he.poly_degree),
        shares: pipeline.uses_smc().then_some(cfg.smc.num_shares),
        acc: None,
        ld: None,
        ad: None,
        msr: None,
        dlr: None,
        dpa_a: None,
        dpa_ad: None,
        ba_a: None,
        ba_ad: None,
        la_success: None,
        sra_success: None,
        wall_ms: None,
    }
}

/// Where run `r`'s round-`t` checkpoint lives under `dir`.
pub fn checkpoint_path(dir: &Path, run_id: usize, round: usize) -> std::path::PathBuf {
    dir.join("checkpoints").join(format!("run{run_id}_round{round}.ftck"))
}

/// Executes all rounds of one run. With `beta > 0` two adversarial
/// trajectories (label flipping and backdoor) are trained alongside the clean
/// one from the same initial model and client samples.
pub fn run_single(cfg: &ExperimentConfig, run_id: usize, seed: u64, out_dir: Option<&Path>) -> Result<RunOutput> {
    let env = Environment::prepare(cfg, seed)?;
    let keys = PipelineKeys::setup(&cfg.pipeline, &cfg.he, &cfg.smc_config(), &mut RngStream::new(seed, "keys"))?;
    let ctx = RunContext { cfg, env: &env, keys: &keys, seed };

    let clean_shards = env.train_shards();
    let adversarial = cfg.attack.adversary.beta > 0.0;
    let (poisoned_shards, backdoor_shards) = if adversarial {
        let mut poisoned = clean_shards.clone();
        poison_shards(&mut poisoned, env.num_classes, &cfg.attack.adversary, &mut RngStream::new(seed, "attack:poison"));
        let mut backdoored = clean_shards.clone();
        plant_backdoor(&mut backdoored, &cfg.attack.adversary, &mut RngStream::new(seed, "attack:backdoor"));
        (poisoned, backdoored)
    } else {
        (Vec::new(), Vec::new())
    };

    let init = env.arch.init(&mut RngStream::new(seed, "init"));
    let (mut model, mut poisoned, mut backdoored) = (init.clone(), init.clone(), init);
    let mut records = Vec::with_capacity(cfg.train.rounds);
    for round in 1..=cfg.train.rounds {
        let started = Instant::now();
        let mut record = blank_record(&ctx, run_id, round);
        let stepped = (|| -> Result<_> {
            let m = run_round(&ctx, &clean_shards, &model, round)?;
            if adversarial {
                let p = run_round(&ctx, &poisoned_shards, &poisoned, round)?;
                let b = run_round(&ctx, &backdoor_shards, &backdoored, round)?;
                Ok((m, Some((p, b))))
            } else {
                Ok((m, None))
            }
        })();
        let (next, adv) = match stepped {
            Ok(v) => v,
            Err(Error::Divergence { .. }) | Err(Error::DegenerateRound) => {
                record.ld = Some(f64::NAN);
                records.push(record);
                return Ok(RunOutput { records, final_model: None, diverged: true });
            }
            Err(e) => return Err(e),
        };
        model = next;
        if let Some((p, b)) = adv {
            poisoned = p;
            backdoored = b;
        }

        let clean = clean_metrics(&model, &ctx)?;
        record.acc = Some(clean.acc);
        record.ld = Some(clean.ld);
        record.ad = Some(clean.ad);
        record.msr = clean.msr;
        record.dlr = clean.dlr;
        if adversarial {
            let acc_poisoned = accuracy(&poisoned, &ctx, &env.test)?;
            record.dpa_a = Some(clean.acc - acc_poisoned);
            record.dpa_ad = spread(&per_client_accuracy(&poisoned, &ctx)?)?;
            record.ba_a = backdoor_success(&backdoored, &env.arch, &env.test, &cfg.attack.adversary)?;
            record.ba_ad = spread(&backdoor_per_client(&backdoored, &ctx)?)?;
        }
        if round == cfg.train.rounds {
            let a = &cfg.attack;
            if cfg.pipeline.uses_he() && a.la_attempts > 0 {
                let toy = ToyLweParams {
                    n: toy_degree_for(cfg.he.poly_degree),
                    modulus: TOY_MODULUS,
                    error_std: a.la_noise,
                    samples: a.la_samples,
                };
                let mut rng = RngStream::new(seed, "attack:lattice");
                record.la_success = Some(la_toy_success(&toy, a.la_attempts, a.la_tolerance, &mut rng)?);
            }
            if cfg.pipeline.uses_smc() && a.sra_trials > 0 {
                let smc = cfg.smc_config();
                let compromised = a.sra_compromised.unwrap_or(smc.threshold - 1);
                let eps = 2f64.powi(-(smc.frac_bits as i32));
                let mut rng = RngStream::new(seed, "attack:sra");
                record.sra_success = Some(sra_success(&smc, compromised, a.sra_trials, eps, &mut rng)?);
            }
        }
        if cfg.report.timing {
            record.wall_ms = Some(started.elapsed().as_secs_f64() * 1e3);
        }
        records.push(record);

        if let Some(dir) = out_dir {
            let due = round == cfg.train.rounds || cfg.report.checkpoint_every.is_some_and(|e| e > 0 && round % e == 0);
            if due {
                let path = checkpoint_path(dir, run_id, round);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                model.write_checkpoint(&path)?;
            }
        }
    }
    Ok(RunOutput { records, final_model: Some(model), diverged: false })
}
